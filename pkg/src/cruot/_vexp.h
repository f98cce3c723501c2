/* Inner loops for the compiled backend.
 *
 * Every loop body is branch-free so that GCC/Clang auto-vectorize them
 * (build with -fno-trapping-math -fno-math-errno; AVX2/FMA if available).
 */
#ifndef CRUOT_VEXP_H
#define CRUOT_VEXP_H

#include <stdint.h>
#include <string.h>

/* exp(x) within 1 ulp for x in [-708, 709]; smaller arguments give 0. */
static inline double cruot_exp(double x)
{
    const double log2e = 1.4426950408889634;
    const double ln2_hi = 6.93147180369123816490e-01;
    const double ln2_lo = 1.90821492927058770002e-10;
    const double shifter = 6755399441055744.0; /* 1.5 * 2^52: rounds to integer */
    double xc = x < -708.0 ? -708.0 : x;
    double t = xc * log2e + shifter;
    double n = t - shifter;
    double r = (xc - n * ln2_hi) - n * ln2_lo;
    /* Taylor to degree 13 on |r| <= ln2 / 2 */
    double p = 1.0 / 6227020800.0;
    p = p * r + 1.0 / 479001600.0;
    p = p * r + 1.0 / 39916800.0;
    p = p * r + 1.0 / 3628800.0;
    p = p * r + 1.0 / 362880.0;
    p = p * r + 1.0 / 40320.0;
    p = p * r + 1.0 / 5040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    int64_t tb, shb, sb;
    double scale;
    memcpy(&tb, &t, 8);
    memcpy(&shb, &shifter, 8);
    sb = (tb - shb + 1023) << 52;
    memcpy(&scale, &sb, 8);
    double y = p * scale;
    return x < -708.0 ? 0.0 : y;
}

/* max_j (u[j] + sgn * v[j]) * inv, four independent lanes to break the dependency chain */
static inline double cruot_max_comb(const double *restrict u, const double *restrict v,
                                    double sgn, double inv, long m)
{
    double m0 = -1.0 / 0.0, m1 = m0, m2 = m0, m3 = m0;
    long j = 0;
    for (; j + 4 <= m; j += 4) {
        double v0 = (u[j] + sgn * v[j]) * inv, v1 = (u[j + 1] + sgn * v[j + 1]) * inv;
        double v2 = (u[j + 2] + sgn * v[j + 2]) * inv, v3 = (u[j + 3] + sgn * v[j + 3]) * inv;
        m0 = v0 > m0 ? v0 : m0;
        m1 = v1 > m1 ? v1 : m1;
        m2 = v2 > m2 ? v2 : m2;
        m3 = v3 > m3 ? v3 : m3;
    }
    for (; j < m; j++) {
        double x = (u[j] + sgn * v[j]) * inv;
        m0 = x > m0 ? x : m0;
    }
    m0 = m1 > m0 ? m1 : m0;
    m2 = m3 > m2 ? m3 : m2;
    return m2 > m0 ? m2 : m0;
}

/* log sum_j exp((h[j] - c[j]) * inv) */
static inline double cruot_row_lse(const double *restrict c, const double *restrict h,
                                   double inv, long m)
{
    double mx = cruot_max_comb(h, c, -1.0, inv, m), s = 0.0;
    long j;
    if (!(mx > -1.0 / 0.0))
        return mx;
    for (j = 0; j < m; j++)
        s += cruot_exp((h[j] - c[j]) * inv - mx);
    return mx + __builtin_log(s);
}

/* mx[j] = max(mx[j], (hi - c[j]) * inv) */
static inline void cruot_col_max(const double *restrict c, double hi, double inv,
                                 double *restrict mx, long m)
{
    for (long j = 0; j < m; j++) {
        double v = (hi - c[j]) * inv;
        mx[j] = v > mx[j] ? v : mx[j];
    }
}

/* acc[j] += exp((hi - c[j]) * inv - mx[j]) */
static inline void cruot_col_acc(const double *restrict c, double hi, double inv,
                                 const double *restrict mx, double *restrict acc, long m)
{
    for (long j = 0; j < m; j++)
        acc[j] += cruot_exp((hi - c[j]) * inv - mx[j]);
}

/* w[j] = exp((s[j] + h[j]) * inv - max); returns sum_j w[j] */
static inline double cruot_softmax_row(const double *restrict s, const double *restrict h,
                                       double inv, double *restrict w, long m)
{
    double mx = cruot_max_comb(s, h, 1.0, inv, m), tot = 0.0;
    long j;
    for (j = 0; j < m; j++)
        w[j] = cruot_exp((s[j] + h[j]) * inv - mx);
    for (j = 0; j < m; j++)
        tot += w[j];
    return tot;
}

#endif
