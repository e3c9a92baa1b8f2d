#include "semileak/core/membership.hpp"

#include <cmath>
#include <string>

#include "semileak/core/error.hpp"

namespace semileak {

bool is_valid_posterior(std::span<const double> p, double tol) {
  if (p.empty()) return false;
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= tol;
}

int argmax(std::span<const double> p) {
  int best = 0;
  for (std::size_t i = 1; i < p.size(); ++i)
    if (p[i] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  return best;
}

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::labeled_member: return "labeled_member";
    case Subset::unlabeled_member: return "unlabeled_member";
    case Subset::nonmember: return "nonmember";
  }
  return "nonmember";
}

Subset subset_from_string(std::string_view s) {
  if (s == "labeled_member") return Subset::labeled_member;
  if (s == "unlabeled_member") return Subset::unlabeled_member;
  if (s == "nonmember") return Subset::nonmember;
  throw DataError("unknown subset tag: " + std::string(s));
}

}  // namespace semileak
