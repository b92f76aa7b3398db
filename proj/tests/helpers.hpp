#pragma once

// Shared helpers for the test suite.

#include <catch2/catch_amalgamated.hpp>

#include <syncguard/common.hpp>

#include <cmath>
#include <vector>

namespace sgtest {

// Matcher for SgError of a specific kind, e.g.
//   REQUIRE_THROWS_MATCHES(expr, syncguard::SgError, kind_is(ErrorKind::io));
inline auto kind_is(syncguard::ErrorKind k) {
  return Catch::Matchers::Predicate<syncguard::SgError>(
      [k](const syncguard::SgError& e) { return e.kind() == k; }, "error kind matches");
}

inline double snr_db(const std::vector<float>& ref, const std::vector<float>& deg) {
  double sig = 0.0, err = 0.0;
  const std::size_t n = std::min(ref.size(), deg.size());
  for (std::size_t i = 0; i < n; ++i) {
    sig += double(ref[i]) * ref[i];
    double d = double(deg[i]) - ref[i];
    err += d * d;
  }
  return 10.0 * std::log10(sig / std::max(err, 1e-300));
}

}  // namespace sgtest
