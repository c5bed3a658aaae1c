#pragma once
// Data-parallel primitives for the trait-grid inner loops.
//
// Every primitive exists as a scalar reference implementation and, on x86-64
// hardware with AVX2, as a vectorized variant. The active backend is chosen
// once at runtime (cpuid probe, overridable with ESDLAB_KERNELS=scalar|avx2).
// Elementwise kernels produce bit-identical results across backends; the
// reduction kernels use compensated summation and agree to a few ulp.

#include <cstddef>
#include <span>
#include <string>

namespace esdlab::kernels {

struct Backend {
    const char* name;

    // elementwise, array (.) array
    void (*add)(const double*, const double*, double*, std::size_t);
    void (*sub)(const double*, const double*, double*, std::size_t);
    void (*mul)(const double*, const double*, double*, std::size_t);
    void (*div)(const double*, const double*, double*, std::size_t);

    // elementwise, array (.) scalar
    void (*add_scalar)(const double*, double, double*, std::size_t);
    void (*sub_scalar_rev)(double, const double*, double*, std::size_t); // s - a
    void (*mul_scalar)(const double*, double, double*, std::size_t);
    void (*div_scalar)(const double*, double, double*, std::size_t);     // a / s
    void (*div_scalar_rev)(double, const double*, double*, std::size_t); // s / a

    void (*neg)(const double*, double*, std::size_t);
    void (*abs)(const double*, double*, std::size_t);
    void (*sqrt)(const double*, double*, std::size_t);

    // integer power by repeated squaring; k may be negative
    void (*powi)(const double*, int, double*, std::size_t);

    // multiplicative positivity-preserving update:
    //   n_i *= (1 + dt*max(r_i,0)) / (1 - dt*min(r_i,0))
    void (*patankar)(double*, const double*, double, std::size_t);

    // trapezoid-rule quadratures on a uniform grid (compensated summation)
    double (*trapezoid)(const double*, std::size_t, double);
    double (*trapezoid_product)(const double*, const double*, std::size_t, double);
    double (*trapezoid_product3)(const double*, const double*, const double*,
                                 std::size_t, double);
};

// Reference backend; always present.
const Backend& scalar();

// AVX2 backend, or nullptr when unsupported (build- or run-time).
const Backend* avx2();

// Backend selected at startup. Env var ESDLAB_KERNELS forces a choice.
const Backend& active();

// Test hook: "scalar", "avx2" or "auto". Throws on unavailable backend.
void force_backend(const std::string& name);

// Transcendentals are evaluated element-by-element through libm in every
// backend, so results never depend on the dispatch decision.
void exp_array(const double*, double*, std::size_t);
void log_array(const double*, double*, std::size_t);
void sin_array(const double*, double*, std::size_t);
void cos_array(const double*, double*, std::size_t);
void tanh_array(const double*, double*, std::size_t);

// span conveniences used across the solver
inline double trapezoid(std::span<const double> a, double dx) {
    return active().trapezoid(a.data(), a.size(), dx);
}
inline double trapezoid_product(std::span<const double> a, std::span<const double> b,
                                double dx) {
    return active().trapezoid_product(a.data(), b.data(), a.size(), dx);
}
inline double trapezoid_product3(std::span<const double> a, std::span<const double> b,
                                 std::span<const double> c, double dx) {
    return active().trapezoid_product3(a.data(), b.data(), c.data(), a.size(), dx);
}

} // namespace esdlab::kernels
