#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace semileak {

// Probability output of a classifier for one input.
using Posterior = std::vector<double>;

// Checks entries >= 0 and sum within tol of 1.
bool is_valid_posterior(std::span<const double> p, double tol = 1e-5);

// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> p);

enum class Subset { labeled_member, unlabeled_member, nonmember };

std::string_view to_string(Subset s);
Subset subset_from_string(std::string_view s);

struct MembershipRecord {
  std::int64_t sample_id = 0;
  bool is_member = false;
  Subset subset = Subset::nonmember;
  double score = 0.0;
};

}  // namespace semileak
