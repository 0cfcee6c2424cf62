#include <doctest.h>

#include <cmath>
#include <set>

#include "rng.hpp"

using namespace slowfast;

TEST_CASE("identical stream paths give identical draws") {
  const NoiseStream a = NoiseStream(42).child("W1").child_indexed("rep", 3);
  const NoiseStream b = NoiseStream(42).child("W1").child_indexed("rep", 3);
  Rng ra(a);
  Rng rb(b);
  for (int i = 0; i < 1000; ++i) {
    CHECK(ra.next() == rb.next());
  }
  Rng na(a);
  Rng nb(b);
  for (int i = 0; i < 1000; ++i) {
    CHECK(na.normal() == nb.normal());
  }
}

TEST_CASE("distinct labels, indices and seeds decorrelate state") {
  const NoiseStream root(7);
  std::set<uint64_t> seeds;
  seeds.insert(root.state_seed());
  seeds.insert(root.child("W1").state_seed());
  seeds.insert(root.child("W2").state_seed());
  seeds.insert(root.child("W1").child("W1").state_seed());
  seeds.insert(root.child_indexed("rep", 0).state_seed());
  seeds.insert(root.child_indexed("rep", 1).state_seed());
  seeds.insert(NoiseStream(8).state_seed());
  CHECK(seeds.size() == 7);
}

TEST_CASE("uniform01 stays inside the open interval") {
  Rng rng(123);
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments match the standard law") {
  Rng rng(999);
  const long n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (long i = 0; i < n; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
    s4 += x * x * x * x;
  }
  const double mean = s1 / n;
  const double var = s2 / n - mean * mean;
  const double kurt = s4 / n;
  // Standard errors: mean 1/sqrt(n), var sqrt(2/n), fourth moment sqrt(96/n).
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(kurt - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("label hashing is order sensitive") {
  const NoiseStream root(1);
  CHECK(root.child("a").child("b").state_seed() !=
        root.child("b").child("a").state_seed());
  CHECK(root.child_indexed("rep", 12).state_seed() !=
        root.child_indexed("rep", 21).state_seed());
}
