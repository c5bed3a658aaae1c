#pragma once
// Model definitions for the two families, hypothesis verification by dense
// sampling, and the constants the long-time theory needs (rho_M, S_m and the
// admissible nutrient reaction time scale beta).

#include "esdlab/expr.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace esdlab::model {

struct TraitDomain {
    double x_min = 0.0;
    double x_max = 1.0;
    std::size_t n = 2;

    TraitDomain() = default;
    TraitDomain(double lo, double hi, std::size_t count);

    double dx() const { return (x_max - x_min) / static_cast<double>(n - 1); }
    std::vector<double> nodes() const;
};

/// Chemostat: dilution R0, fresh nutrient S0, rendering factor a(x) and
/// uptake eta(x,S). eta_S is derived symbolically at construction.
struct ChemostatModel {
    double R0 = 1.0;
    double S0 = 1.0;
    expr::Expression a, eta, eta_S;

    static ChemostatModel make(double R0, double S0, expr::Expression a,
                               expr::Expression eta);
};

/// Generic birth-death model: growth R(x,S), nutrient reaction Q(S,rho) and
/// time scale beta (beta = 0 selects the quasi-static branch).
struct GeneralModel {
    double beta = 0.0;
    expr::Expression R, Q;
    expr::Expression R_S, R_x, R_xx, Q_S, Q_rho;
    /// Root of Q(.,0); the nutrient never exceeds this level. NaN when the
    /// bracket [0, inf) holds no sign change.
    double S0_effective = 0.0;

    static GeneralModel make(double beta, expr::Expression R, expr::Expression Q,
                             std::optional<double> S0_hint = {});
};

struct Hypothesis {
    std::string name;
    bool pass = false;
    bool informational = false;
    double worst_value = 0.0;
    double at_x = 0.0, at_S = 0.0, at_rho = 0.0;
    std::string detail;
};

struct SampleBox {
    double S_lo = 0.0, S_hi = 1.0;
    double rho_lo = 0.0, rho_hi = 1.0;
};

struct AssumptionReport {
    std::vector<Hypothesis> hypotheses;

    // chemostat constants
    double a_m = 0.0, a_M = 0.0;
    double Keta_low = 0.0, Keta_high = 0.0;

    // general constants
    double K_Q = 0.0;
    double K1_low = 0.0, K1_high = 0.0;
    double K2 = 0.0, K3 = 0.0, K4 = 0.0;
    double S0_effective = 0.0;
    double rho_M = 0.0, S_m = 0.0, beta_max = 0.0;
    bool beta_holds = false;

    // extrema of |Q_S|/|Q_rho| and |Q_S| over the final box, for the Riccati
    // window bounds
    SampleBox box;
    double qs_over_qrho_min = 0.0, qs_over_qrho_max = 0.0;
    double abs_qs_min = 0.0, abs_qrho_min = 0.0;

    std::size_t samples_per_axis = 0;

    bool all_passed() const;
    const Hypothesis* find(const std::string& name) const;
    std::string to_text() const;
    std::string csv_header() const;
    std::string csv_row() const;
};

/// Verifies eta(x,S0) > R0, eta(x,0) = 0, 0 < eta_S bounded, 0 < a bounded on
/// the trait grid x {S_j} in (0, S0]. Failures are reported, not thrown.
AssumptionReport check_chemostat_assumptions(const ChemostatModel& m, const TraitDomain& d,
                                             std::size_t S_samples);

/// Verifies the sign/monotonicity hypotheses for Q and R on the given box and
/// estimates K_Q, K1, K2, K4.
AssumptionReport check_general_assumptions(const GeneralModel& m, const TraitDomain& d,
                                           const SampleBox& box, std::size_t samples);

/// rho_M = exp(max(ln rho_init + beta*S_init, C2)) with
/// C2 = beta*S0 + ln((K2 + K1_high*S0 + K4)/K3), K3 = K_Q from the report.
double estimate_rho_max(const GeneralModel& m, const AssumptionReport& report,
                        double rho_init, double S_init);

/// Bisection root of S -> Q(S, rho_M); unique because Q_S < 0.
double compute_S_m(const GeneralModel& m, double rho_M, double tol);

struct BetaSmallness {
    bool holds = false;
    double beta_max = 0.0;
    double qs_over_qrho_min = 0.0, qs_over_qrho_max = 0.0;
    double abs_qs_min = 0.0, abs_qrho_min = 0.0;
};

/// Over [0,rho_M] x [S_m,S0]: beta_max = min(|Q_S|/|Q_rho|) / (4 max(K1_high
/// rho_M / |Q_S|)); holds when m.beta <= beta_max.
BetaSmallness check_beta_smallness(const GeneralModel& m, const AssumptionReport& report,
                                   double rho_M, double S_m, std::size_t samples);

struct AnalyzeOptions {
    std::size_t samples = 256;
    double rho_init = 1.0;
    double S_init = 1.0;
    std::optional<double> rho_probe; // bootstrap box height; default derived
};

/// Full pipeline: bootstrap box -> constants -> rho_M -> S_m -> final box
/// [S_m, S0] x [0, rho_M] -> beta_max. The bootstrap exists because K_Q on a
/// box reaching S = 0 vanishes for models whose Q_rho ~ -S.
AssumptionReport analyze_general(const GeneralModel& m, const TraitDomain& d,
                                 const AnalyzeOptions& opts);

// Monotone bisection helper shared by the equilibrium and solver code.
// f must change sign between lo and hi (f(lo) and f(hi) of opposite sign or
// zero); returns a point within tol of the root.
template <class F>
double bisect(F&& f, double lo, double hi, double tol) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace esdlab::model
