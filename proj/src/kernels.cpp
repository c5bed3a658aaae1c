// Scalar reference kernels and the runtime backend dispatch.

#include "esdlab/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace esdlab::kernels {

namespace {

void s_add(const double* a, const double* b, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] + b[i];
}
void s_sub(const double* a, const double* b, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] - b[i];
}
void s_mul(const double* a, const double* b, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] * b[i];
}
void s_div(const double* a, const double* b, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] / b[i];
}
void s_add_scalar(const double* a, double s, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] + s;
}
void s_sub_scalar_rev(double s, const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = s - a[i];
}
void s_mul_scalar(const double* a, double s, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] * s;
}
void s_div_scalar(const double* a, double s, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = a[i] / s;
}
void s_div_scalar_rev(double s, const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = s / a[i];
}
void s_neg(const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = -a[i];
}
void s_abs(const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::fabs(a[i]);
}
void s_sqrt(const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::sqrt(a[i]);
}

// x^k for one element; same multiply sequence as the vector variant so the
// backends agree bitwise.
inline double powi_one(double x, unsigned k) {
    double r = 1.0, p = x;
    while (k) {
        if (k & 1u) r *= p;
        k >>= 1u;
        if (k) p *= p;
    }
    return r;
}

void s_powi(const double* a, int k, double* o, std::size_t n) {
    const bool inv = k < 0;
    const unsigned uk = inv ? static_cast<unsigned>(-static_cast<long long>(k))
                            : static_cast<unsigned>(k);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = powi_one(a[i], uk);
        o[i] = inv ? 1.0 / r : r;
    }
}

void s_patankar(double* v, const double* r, double dt, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double gain = r[i] > 0.0 ? r[i] : 0.0;
        const double loss = r[i] < 0.0 ? -r[i] : 0.0;
        v[i] *= (1.0 + dt * gain) / (1.0 + dt * loss);
    }
}

struct Kahan {
    double sum = 0.0, comp = 0.0;
    inline void add(double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
};

double s_trapezoid(const double* a, std::size_t n, double dx) {
    if (n == 0) return 0.0;
    if (n == 1) return 0.0;
    Kahan acc;
    acc.add(0.5 * a[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) acc.add(a[i]);
    acc.add(0.5 * a[n - 1]);
    return acc.sum * dx;
}

double s_trapezoid_product(const double* a, const double* b, std::size_t n, double dx) {
    if (n < 2) return 0.0;
    Kahan acc;
    acc.add(0.5 * a[0] * b[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) acc.add(a[i] * b[i]);
    acc.add(0.5 * a[n - 1] * b[n - 1]);
    return acc.sum * dx;
}

double s_trapezoid_product3(const double* a, const double* b, const double* c,
                            std::size_t n, double dx) {
    if (n < 2) return 0.0;
    Kahan acc;
    acc.add(0.5 * a[0] * b[0] * c[0]);
    for (std::size_t i = 1; i + 1 < n; ++i) acc.add(a[i] * b[i] * c[i]);
    acc.add(0.5 * a[n - 1] * b[n - 1] * c[n - 1]);
    return acc.sum * dx;
}

const Backend scalar_backend = {
    "scalar",
    s_add, s_sub, s_mul, s_div,
    s_add_scalar, s_sub_scalar_rev, s_mul_scalar, s_div_scalar, s_div_scalar_rev,
    s_neg, s_abs, s_sqrt,
    s_powi,
    s_patankar,
    s_trapezoid, s_trapezoid_product, s_trapezoid_product3,
};

const Backend* selected = nullptr;

const Backend* pick_default() {
    if (const char* env = std::getenv("ESDLAB_KERNELS")) {
        const std::string want = env;
        if (want == "scalar") return &scalar_backend;
        if (want == "avx2") {
            if (const Backend* b = avx2()) return b;
            throw std::runtime_error("ESDLAB_KERNELS=avx2 but AVX2 is unavailable");
        }
        // anything else (including "auto") falls through to the probe
    }
    if (const Backend* b = avx2()) return b;
    return &scalar_backend;
}

} // namespace

const Backend& scalar() { return scalar_backend; }

const Backend& active() {
    if (!selected) selected = pick_default();
    return *selected;
}

void force_backend(const std::string& name) {
    if (name == "scalar") {
        selected = &scalar_backend;
    } else if (name == "avx2") {
        const Backend* b = avx2();
        if (!b) throw std::runtime_error("AVX2 backend unavailable");
        selected = b;
    } else if (name == "auto") {
        selected = nullptr;
        (void)active();
    } else {
        throw std::runtime_error("unknown kernel backend: " + name);
    }
}

void exp_array(const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::exp(a[i]);
}
void log_array(const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::log(a[i]);
}
void sin_array(const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::sin(a[i]);
}
void cos_array(const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::cos(a[i]);
}
void tanh_array(const double* a, double* o, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) o[i] = std::tanh(a[i]);
}

} // namespace esdlab::kernels
