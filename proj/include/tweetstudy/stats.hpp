#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "tweetstudy/eventstudy.hpp"
#include "tweetstudy/io.hpp"
#include "tweetstudy/numeric.hpp"

namespace tweetstudy::stats {

class LengthMismatch : public std::invalid_argument {
public:
    LengthMismatch() : std::invalid_argument("paired samples must have equal length") {}
};

class TooFewPairs : public std::invalid_argument {
public:
    TooFewPairs() : std::invalid_argument("paired t-test needs at least 2 pairs") {}
};

namespace detail {

inline double log_beta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_cf(double a, double b, double x) {
    constexpr int kMaxIter = 500;
    constexpr double kEps = 1e-16;
    constexpr double kTiny = 1e-300;
    double qab = a + b;
    double qap = a + 1.0;
    double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b), accurate to ~1e-14.
inline double reg_incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double front = std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
    return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Two-tailed p-value of a Student-t statistic with dof degrees of freedom.
inline double student_t_two_tailed_p(double t, double dof) {
    if (std::isinf(t)) return 0.0;
    return reg_incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
}

inline double student_t_cdf(double t, double dof) {
    double p = student_t_two_tailed_p(t, dof);
    return t >= 0.0 ? 1.0 - p / 2.0 : p / 2.0;
}

struct TTestResult {
    double t_statistic = 0.0;
    double degrees_of_freedom = 0.0;
    double p_value = 1.0;
    double mean_difference = 0.0;
};

/// Paired two-tailed t-test. Zero-variance differences degenerate to
/// p = 1 when the mean difference is 0 and p = 0 otherwise.
inline TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw LengthMismatch();
    if (a.size() < 2) throw TooFewPairs();
    std::size_t n = a.size();
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) d[i] = a[i] - b[i];
    TTestResult res;
    res.degrees_of_freedom = static_cast<double>(n - 1);
    res.mean_difference = numeric::mean(d);
    double sd = *numeric::sample_sd(d);
    if (sd == 0.0) {
        if (res.mean_difference == 0.0) {
            res.t_statistic = 0.0;
            res.p_value = 1.0;
        } else {
            res.t_statistic = res.mean_difference > 0.0
                                  ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity();
            res.p_value = 0.0;
        }
        return res;
    }
    res.t_statistic = res.mean_difference / (sd / std::sqrt(static_cast<double>(n)));
    res.p_value = student_t_two_tailed_p(res.t_statistic, res.degrees_of_freedom);
    return res;
}

/// Star legend as printed in the source material: * <0.05, ** <0.001,
/// *** <0.0001. A p of exactly 0.05 earns no star.
inline const char* significance_stars(double p) {
    if (p < 0.0001) return "***";
    if (p < 0.001) return "**";
    if (p < 0.05) return "*";
    return "";
}

/// Lower-triangular matrix of pairwise paired t-tests between the 15
/// post-tweet periods, plus the per-period mean and sd rows.
struct PeriodMatrix {
    std::array<std::array<double, kEventPeriods>, kEventPeriods> p{};
    std::array<std::array<double, kEventPeriods>, kEventPeriods> t{};
    std::array<double, kEventPeriods> period_mean{};
    std::array<std::optional<double>, kEventPeriods> period_sd{};
    std::size_t window_count = 0;
};

inline PeriodMatrix ttest_matrix(const eventstudy::EventPanel& panel) {
    if (panel.windows.empty()) throw TooFewPairs();
    std::array<std::vector<double>, kEventPeriods> cols;
    for (auto& col : cols) col.reserve(panel.windows.size());
    for (const auto& w : panel.windows)
        for (int k = 0; k < kEventPeriods; ++k) cols[k].push_back(w.returns[k]);
    PeriodMatrix m;
    m.window_count = panel.windows.size();
    for (int i = 0; i < kEventPeriods; ++i) {
        m.period_mean[i] = numeric::mean(cols[i]);
        m.period_sd[i] = numeric::sample_sd(cols[i]);
    }
    for (int i = 0; i < kEventPeriods; ++i) {
        for (int j = i + 1; j < kEventPeriods; ++j) {
            TTestResult res = paired_ttest(cols[i], cols[j]);
            m.p[i][j] = m.p[j][i] = res.p_value;
            m.t[i][j] = res.t_statistic;
            m.t[j][i] = -res.t_statistic;
        }
    }
    return m;
}

namespace detail {

/// ".023" style: three decimals, no leading zero, as in the table the
/// layout mirrors.
inline std::string table_p(double p) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.3f", p);
    std::string s(buf);
    if (s.size() > 1 && s[0] == '0') s.erase(0, 1);
    return s;
}

inline std::string table_stat(double v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    std::string s(buf);
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    else if (s.rfind("-0.", 0) == 0) s.erase(1, 1);
    return s;
}

} // namespace detail

/// Human-readable matrix mirroring the lower-triangle layout with
/// inline stars, a Mean row, an SD row and the star legend.
inline void write_matrix(const PeriodMatrix& m, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "ROI";
    for (int k = 1; k <= kEventPeriods; ++k) out << "\tt" << k;
    out << '\n';
    for (int i = 0; i < kEventPeriods; ++i) {
        out << 't' << (i + 1);
        for (int j = 0; j < i; ++j)
            out << '\t' << detail::table_p(m.p[i][j]) << significance_stars(m.p[i][j]);
        out << "\t-";
        out << '\n';
    }
    out << "Mean";
    for (int k = 0; k < kEventPeriods; ++k) out << '\t' << detail::table_stat(m.period_mean[k]);
    out << '\n';
    out << "SD";
    for (int k = 0; k < kEventPeriods; ++k) {
        out << '\t';
        if (m.period_sd[k]) out << detail::table_stat(*m.period_sd[k]);
        else out << "-";
    }
    out << '\n';
    out << '\n';
    out << "Significance levels: * <0.05 , ** <0.001 , *** <0.0001 , "
           "p-values are calculated via paired two-tailed t-test. n = "
        << m.window_count << '\n';
}

/// Machine-readable long form: one row per (i, j) pair, i < j.
inline void write_matrix_long(const PeriodMatrix& m, const std::string& path) {
    std::ofstream out = open_output(path);
    out << "i,j,t,p\n";
    for (int i = 0; i < kEventPeriods; ++i)
        for (int j = i + 1; j < kEventPeriods; ++j)
            out << (i + 1) << ',' << (j + 1) << ',' << format_double(m.t[i][j]) << ','
                << format_double(m.p[i][j]) << '\n';
}

} // namespace tweetstudy::stats
