// AVX2 variants of the grid kernels. This translation unit is compiled with
// -mavx2 (no FMA: elementwise results must match the scalar backend bitwise)
// and is only entered after a cpuid check.

#include "esdlab/kernels.hpp"

#if defined(ESDLAB_HAVE_AVX2) && (defined(__x86_64__) || defined(_M_X64))

#include <immintrin.h>

#include <cmath>
#include <cstddef>

namespace esdlab::kernels {
namespace {

constexpr std::size_t W = 4; // doubles per __m256d

template <class VecOp, class ScalOp>
inline void map2(const double* a, const double* b, double* o, std::size_t n,
                 VecOp vec, ScalOp scal) {
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        const __m256d va = _mm256_loadu_pd(a + i);
        const __m256d vb = _mm256_loadu_pd(b + i);
        _mm256_storeu_pd(o + i, vec(va, vb));
    }
    for (; i < n; ++i) o[i] = scal(a[i], b[i]);
}

template <class VecOp, class ScalOp>
inline void map1(const double* a, double* o, std::size_t n, VecOp vec, ScalOp scal) {
    std::size_t i = 0;
    for (; i + W <= n; i += W) _mm256_storeu_pd(o + i, vec(_mm256_loadu_pd(a + i)));
    for (; i < n; ++i) o[i] = scal(a[i]);
}

void v_add(const double* a, const double* b, double* o, std::size_t n) {
    map2(a, b, o, n, [](__m256d x, __m256d y) { return _mm256_add_pd(x, y); },
         [](double x, double y) { return x + y; });
}
void v_sub(const double* a, const double* b, double* o, std::size_t n) {
    map2(a, b, o, n, [](__m256d x, __m256d y) { return _mm256_sub_pd(x, y); },
         [](double x, double y) { return x - y; });
}
void v_mul(const double* a, const double* b, double* o, std::size_t n) {
    map2(a, b, o, n, [](__m256d x, __m256d y) { return _mm256_mul_pd(x, y); },
         [](double x, double y) { return x * y; });
}
void v_div(const double* a, const double* b, double* o, std::size_t n) {
    map2(a, b, o, n, [](__m256d x, __m256d y) { return _mm256_div_pd(x, y); },
         [](double x, double y) { return x / y; });
}

void v_add_scalar(const double* a, double s, double* o, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    map1(a, o, n, [vs](__m256d x) { return _mm256_add_pd(x, vs); },
         [s](double x) { return x + s; });
}
void v_sub_scalar_rev(double s, const double* a, double* o, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    map1(a, o, n, [vs](__m256d x) { return _mm256_sub_pd(vs, x); },
         [s](double x) { return s - x; });
}
void v_mul_scalar(const double* a, double s, double* o, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    map1(a, o, n, [vs](__m256d x) { return _mm256_mul_pd(x, vs); },
         [s](double x) { return x * s; });
}
void v_div_scalar(const double* a, double s, double* o, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    map1(a, o, n, [vs](__m256d x) { return _mm256_div_pd(x, vs); },
         [s](double x) { return x / s; });
}
void v_div_scalar_rev(double s, const double* a, double* o, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(s);
    map1(a, o, n, [vs](__m256d x) { return _mm256_div_pd(vs, x); },
         [s](double x) { return s / x; });
}

const __m256d sign_mask = _mm256_set1_pd(-0.0);

void v_neg(const double* a, double* o, std::size_t n) {
    map1(a, o, n, [](__m256d x) { return _mm256_xor_pd(x, sign_mask); },
         [](double x) { return -x; });
}
void v_abs(const double* a, double* o, std::size_t n) {
    map1(a, o, n, [](__m256d x) { return _mm256_andnot_pd(sign_mask, x); },
         [](double x) { return std::fabs(x); });
}
void v_sqrt(const double* a, double* o, std::size_t n) {
    map1(a, o, n, [](__m256d x) { return _mm256_sqrt_pd(x); },
         [](double x) { return std::sqrt(x); });
}

void v_powi(const double* a, int k, double* o, std::size_t n) {
    const bool inv = k < 0;
    const unsigned uk = inv ? static_cast<unsigned>(-static_cast<long long>(k))
                            : static_cast<unsigned>(k);
    const __m256d one = _mm256_set1_pd(1.0);
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        __m256d r = one;
        __m256d p = _mm256_loadu_pd(a + i);
        unsigned e = uk;
        while (e) {
            if (e & 1u) r = _mm256_mul_pd(r, p);
            e >>= 1u;
            if (e) p = _mm256_mul_pd(p, p);
        }
        if (inv) r = _mm256_div_pd(one, r);
        _mm256_storeu_pd(o + i, r);
    }
    for (; i < n; ++i) {
        double r = 1.0, p = a[i];
        unsigned e = uk;
        while (e) {
            if (e & 1u) r *= p;
            e >>= 1u;
            if (e) p *= p;
        }
        o[i] = inv ? 1.0 / r : r;
    }
}

void v_patankar(double* v, const double* r, double dt, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d vdt = _mm256_set1_pd(dt);
    std::size_t i = 0;
    for (; i + W <= n; i += W) {
        const __m256d rr = _mm256_loadu_pd(r + i);
        const __m256d gain = _mm256_max_pd(rr, zero);
        const __m256d loss = _mm256_max_pd(_mm256_xor_pd(rr, sign_mask), zero);
        const __m256d num = _mm256_add_pd(one, _mm256_mul_pd(vdt, gain));
        const __m256d den = _mm256_add_pd(one, _mm256_mul_pd(vdt, loss));
        const __m256d vv = _mm256_loadu_pd(v + i);
        _mm256_storeu_pd(v + i, _mm256_mul_pd(vv, _mm256_div_pd(num, den)));
    }
    for (; i < n; ++i) {
        const double gain = r[i] > 0.0 ? r[i] : 0.0;
        const double loss = r[i] < 0.0 ? -r[i] : 0.0;
        v[i] *= (1.0 + dt * gain) / (1.0 + dt * loss);
    }
}

// 4 independent Kahan accumulators in lanes, folded with a scalar Kahan pass.
struct VKahan {
    __m256d sum = _mm256_setzero_pd();
    __m256d comp = _mm256_setzero_pd();
    inline void add(__m256d x) {
        const __m256d y = _mm256_sub_pd(x, comp);
        const __m256d t = _mm256_add_pd(sum, y);
        comp = _mm256_sub_pd(_mm256_sub_pd(t, sum), y);
        sum = t;
    }
};

template <class Load>
double trapezoid_impl(std::size_t n, double dx, Load load) {
    if (n < 2) return 0.0;
    VKahan acc;
    std::size_t i = 1;
    for (; i + W <= n - 1; i += W) acc.add(load.vec(i));
    double sum = 0.0, comp = 0.0;
    auto kadd = [&](double x) {
        const double y = x - comp;
        const double t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    };
    kadd(0.5 * load(0));
    for (; i + 1 < n; ++i) kadd(load(i));
    kadd(0.5 * load(n - 1));
    alignas(32) double s[W], c[W];
    _mm256_store_pd(s, acc.sum);
    _mm256_store_pd(c, acc.comp);
    for (std::size_t l = 0; l < W; ++l) {
        kadd(s[l]);
        kadd(-c[l]);
    }
    return sum * dx;
}

struct Load1 {
    const double* a;
    double operator()(std::size_t i) const { return a[i]; }
    __m256d vec(std::size_t i) const { return _mm256_loadu_pd(a + i); }
};
struct Load2 {
    const double* a;
    const double* b;
    double operator()(std::size_t i) const { return a[i] * b[i]; }
    __m256d vec(std::size_t i) const {
        return _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    }
};
struct Load3 {
    const double* a;
    const double* b;
    const double* c;
    double operator()(std::size_t i) const { return a[i] * b[i] * c[i]; }
    __m256d vec(std::size_t i) const {
        return _mm256_mul_pd(_mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)),
                             _mm256_loadu_pd(c + i));
    }
};

double v_trapezoid(const double* a, std::size_t n, double dx) {
    return trapezoid_impl(n, dx, Load1{a});
}
double v_trapezoid_product(const double* a, const double* b, std::size_t n, double dx) {
    return trapezoid_impl(n, dx, Load2{a, b});
}
double v_trapezoid_product3(const double* a, const double* b, const double* c,
                            std::size_t n, double dx) {
    return trapezoid_impl(n, dx, Load3{a, b, c});
}

const Backend avx2_backend = {
    "avx2",
    v_add, v_sub, v_mul, v_div,
    v_add_scalar, v_sub_scalar_rev, v_mul_scalar, v_div_scalar, v_div_scalar_rev,
    v_neg, v_abs, v_sqrt,
    v_powi,
    v_patankar,
    v_trapezoid, v_trapezoid_product, v_trapezoid_product3,
};

} // namespace

const Backend* avx2() {
    static const bool ok = __builtin_cpu_supports("avx2");
    return ok ? &avx2_backend : nullptr;
}

} // namespace esdlab::kernels

#else

namespace esdlab::kernels {
const Backend* avx2() { return nullptr; }
} // namespace esdlab::kernels

#endif
