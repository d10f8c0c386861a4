#include "vds/utility.hpp"

#include <cmath>
#include <stdexcept>

namespace vds {

namespace {

// Small integer exponents (every common curvature) take a squaring loop
// instead of the much slower std::pow; the marginal utility is evaluated
// once per user per iteration inside the solver hot loops. Large exponents
// stay on std::pow: their runs sit so close to the line-search plateau that
// even last-ulp changes alter where progress stops.
bool small_integer(double exponent) {
    return exponent > 0.0 && exponent <= 16.0 &&
           exponent == static_cast<double>(static_cast<unsigned>(exponent));
}

double power(double base, double exponent) {
    if (small_integer(exponent)) {
        auto k = static_cast<unsigned>(exponent);
        double r = 1.0;
        while (k > 0) {
            if (k & 1u) r *= base;
            base *= base;
            k >>= 1u;
        }
        return r;
    }
    return std::pow(base, exponent);
}

}  // namespace

void validate(const UtilityParams& p) {
    if (!(std::isfinite(p.alpha) && p.alpha > 0.0))
        throw std::invalid_argument("utility: alpha must be finite and positive");
    if (!(std::isfinite(p.A) && p.A >= 0.0) || !(std::isfinite(p.B) && p.B >= 0.0))
        throw std::invalid_argument("utility: A and B must be finite and nonnegative");
    if (p.A == 0.0 && p.B == 0.0)
        throw std::invalid_argument("utility: A and B cannot both be zero");
}

double g_prime(const UtilityParams& p, double z) {
    double v = p.B > 0.0 ? p.B / z : 0.0;
    if (p.A > 0.0) v += power(p.A / z, p.alpha);
    return v;
}

double g_double_prime(const UtilityParams& p, double z) {
    double v = p.B > 0.0 ? -p.B / (z * z) : 0.0;
    if (p.A > 0.0) {
        if (small_integer(p.alpha))
            v -= p.alpha * power(p.A / z, p.alpha) / z;
        else
            v -= p.alpha * std::pow(p.A, p.alpha) * std::pow(z, -p.alpha - 1.0);
    }
    return v;
}

Marginals g_marginals(const UtilityParams& p, double z) {
    const double b = p.B > 0.0 ? p.B / z : 0.0;
    const double a = p.A > 0.0 ? power(p.A / z, p.alpha) : 0.0;
    return {a + b, (p.alpha * a + b) / z};
}

double g_value(const UtilityParams& p, double z) {
    double v = p.B > 0.0 ? p.B * std::log(z) : 0.0;
    if (p.A > 0.0) {
        if (p.alpha == 1.0) {
            v += p.A * std::log(z);
        } else {
            v += std::pow(p.A, p.alpha) * (std::pow(z, 1.0 - p.alpha) - 1.0) / (1.0 - p.alpha);
        }
    }
    return v;
}

void UtilitySet::set_default(UtilityParams p) {
    validate(p);
    default_ = p;
}

void UtilitySet::set_server(std::size_t i, UtilityParams p) {
    validate(p);
    overrides_[i] = p;
}

const UtilityParams& UtilitySet::server(std::size_t i) const {
    auto it = overrides_.find(i);
    return it == overrides_.end() ? default_ : it->second;
}

double server_utility(const Cluster& c, const Allocation& x, const UtilitySet& u, std::size_t i) {
    const UtilityParams& p = u.server(i);
    double total = 0.0;
    for (std::size_t n : c.users_at(i)) {
        const double share = weighted_vds(c, x, n, i);
        if (share <= 0.0)
            throw std::domain_error("server_utility: every user at the server needs tasks");
        total += c.weight(n) * g_value(p, share);
    }
    return total;
}

double total_utility(const Cluster& c, const Allocation& x, const UtilitySet& u) {
    double t = 0.0;
    for (std::size_t i = 0; i < c.num_servers(); ++i) t += server_utility(c, x, u, i);
    return t;
}

}  // namespace vds
