#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cfmimo::eval {

struct PropertyResult {
  std::string name;
  bool pass = false;
  std::string detail;  // worst-case numbers / counts, comma-free
  double seconds = 0.0;
};

// Deterministic invariant checks shared by `eval properties` and the
// acceptance harness. Tolerances are pinned inside each check.
PropertyResult check_equivariance(std::uint64_t seed, int n_draws = 100);
PropertyResult check_degeneracy(std::uint64_t seed, int n_draws = 100);
PropertyResult check_gradient_fidelity(std::uint64_t seed);
PropertyResult check_constraints(std::uint64_t seed, int n_draws = 1000);
PropertyResult check_relaxation_consistency(std::uint64_t seed,
                                            int n_draws = 100);
PropertyResult check_solver_quality(std::uint64_t seed);
PropertyResult check_nmse_closed_form(std::uint64_t seed);

std::vector<PropertyResult> run_property_suite(std::uint64_t seed);

bool all_pass(const std::vector<PropertyResult>& rs);
std::string properties_report(const std::vector<PropertyResult>& rs);
std::string properties_csv(const std::vector<PropertyResult>& rs);

}  // namespace cfmimo::eval
