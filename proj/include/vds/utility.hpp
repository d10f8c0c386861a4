#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "vds/model.hpp"

namespace vds {

/// Parameters of the per-server utility shape. The utility of a weighted
/// virtual dominant share z has marginal
///
///     g'(z) = (A / z)^alpha + B / z,        z > 0,
///
/// so alpha = 1, A = 1, B = 0 is proportional fairness on shares and large
/// alpha approaches max-min on shares. A and B must be nonnegative, not both
/// zero; alpha must be positive.
struct UtilityParams {
    double alpha = 1.0;
    double A = 1.0;
    double B = 0.0;
};

/// Throws std::invalid_argument when the parameters are out of range.
void validate(const UtilityParams& p);

/// Marginal utility g'(z). Precondition: z > 0. Very small z may overflow to
/// +infinity, which callers treat as an over-steep point.
[[nodiscard]] double g_prime(const UtilityParams& p, double z);

/// Second derivative g''(z) < 0. Precondition: z > 0.
[[nodiscard]] double g_double_prime(const UtilityParams& p, double z);

/// Antiderivative of g' gauged so g(1) = 0. Precondition: z > 0.
[[nodiscard]] double g_value(const UtilityParams& p, double z);

/// g'(z) together with |g''(z)|, sharing the one power evaluation; the
/// solver loops need both for every cell they touch.
struct Marginals {
    double first = 0.0;
    double second_magnitude = 0.0;
};
[[nodiscard]] Marginals g_marginals(const UtilityParams& p, double z);

/// Utility shape per server: a shared default plus per-server overrides.
class UtilitySet {
  public:
    UtilitySet() = default;
    explicit UtilitySet(UtilityParams shared) : default_(shared) { validate(default_); }

    void set_default(UtilityParams p);
    void set_server(std::size_t i, UtilityParams p);

    [[nodiscard]] const UtilityParams& server(std::size_t i) const;

  private:
    UtilityParams default_{};
    std::unordered_map<std::size_t, UtilityParams> overrides_;
};

/// Sum over users at server i of w_n * g_i(weighted vds). Diagnostic view of
/// the objective the equilibrium conditions come from; requires every user at
/// the server to have positive total tasks.
[[nodiscard]] double server_utility(const Cluster& c, const Allocation& x, const UtilitySet& u,
                                    std::size_t i);

/// Sum of server_utility over servers.
[[nodiscard]] double total_utility(const Cluster& c, const Allocation& x, const UtilitySet& u);

}  // namespace vds
