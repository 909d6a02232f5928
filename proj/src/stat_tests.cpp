#include "edpredict/stat_tests.hpp"

#include "edpredict/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace edpredict::stats {

namespace {

struct Moments {
    double mean = 0.0;
    double variance = 0.0; // unbiased
};

Moments moments(std::span<const double> x) {
    Moments m;
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) {
        ss += (v - m.mean) * (v - m.mean);
    }
    m.variance = x.size() > 1 ? ss / static_cast<double>(x.size() - 1) : 0.0;
    return m;
}

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double chi_squared_upper(double statistic, double df) {
    if (!(statistic > 0.0)) {
        return 1.0;
    }
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), statistic));
}

// counts[u] = number of ways to pick which m of the m+n ranks belong to the
// first sample such that its U statistic equals u.
std::vector<double> exact_u_counts(std::size_t m, std::size_t n) {
    // table[i][j] holds the distribution for sizes (i, j)
    const std::size_t max_u = m * n;
    std::vector<std::vector<std::vector<double>>> table(
        m + 1, std::vector<std::vector<double>>(n + 1));
    for (std::size_t i = 0; i <= m; ++i) {
        for (std::size_t j = 0; j <= n; ++j) {
            auto &cell = table[i][j];
            cell.assign(i * j + 1, 0.0);
            if (i == 0 || j == 0) {
                cell[0] = 1.0;
                continue;
            }
            // Largest value belongs to sample 1 (adds j to U) or to sample 2.
            const auto &with_first = table[i - 1][j];
            const auto &with_second = table[i][j - 1];
            for (std::size_t u = 0; u < with_first.size(); ++u) {
                cell[u + j] += with_first[u];
            }
            for (std::size_t u = 0; u < with_second.size(); ++u) {
                cell[u] += with_second[u];
            }
        }
    }
    auto out = std::move(table[m][n]);
    out.resize(max_u + 1, 0.0);
    return out;
}

} // namespace

WelchResult welch_t(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2) {
        throw Error(ErrorCode::SampleTooSmall, "welch_t needs at least two values per sample");
    }
    const Moments ma = moments(a);
    const Moments mb = moments(b);
    const double se_a = ma.variance / static_cast<double>(a.size());
    const double se_b = mb.variance / static_cast<double>(b.size());
    const double se2 = se_a + se_b;

    WelchResult out;
    if (se2 == 0.0) {
        out.zero_variance = true;
        if (ma.mean == mb.mean) {
            out.statistic = 0.0;
            out.p_value = 1.0;
        } else {
            out.statistic = std::copysign(std::numeric_limits<double>::infinity(),
                                          ma.mean - mb.mean);
            out.p_value = 0.0;
        }
        return out;
    }
    out.statistic = (ma.mean - mb.mean) / std::sqrt(se2);
    out.degrees_of_freedom =
        se2 * se2 /
        (se_a * se_a / static_cast<double>(a.size() - 1) +
         se_b * se_b / static_cast<double>(b.size() - 1));
    const boost::math::students_t dist(out.degrees_of_freedom);
    out.p_value = std::min(
        1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.statistic))));
    return out;
}

std::vector<double> midranks(std::span<const double> x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = rank;
        }
        i = j + 1;
    }
    return ranks;
}

RankSumResult wilcoxon_rank_sum(std::span<const double> a, std::span<const double> b,
                                std::size_t exact_threshold) {
    if (a.empty() || b.empty()) {
        throw Error(ErrorCode::EmptySample, "wilcoxon_rank_sum needs nonempty samples");
    }
    const std::size_t m = a.size();
    const std::size_t n = b.size();
    const std::size_t total = m + n;

    std::vector<double> pooled(a.begin(), a.end());
    pooled.insert(pooled.end(), b.begin(), b.end());
    const auto ranks = midranks(pooled);

    double rank_sum_a = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        rank_sum_a += ranks[i];
    }
    RankSumResult out;
    out.u = rank_sum_a - 0.5 * static_cast<double>(m * (m + 1));

    // Tie groups from the sorted pooled values.
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    bool has_ties = false;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) {
            ++j;
        }
        const double t = static_cast<double>(j - i);
        if (j - i > 1) {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        i = j;
    }

    if (total <= exact_threshold && !has_ties) {
        out.exact = true;
        const auto counts = exact_u_counts(m, n);
        const double all = std::accumulate(counts.begin(), counts.end(), 0.0);
        // U is integral without ties
        const auto u = static_cast<std::size_t>(std::llround(out.u));
        double lower = 0.0;
        double upper = 0.0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            if (k <= u) {
                lower += counts[k];
            }
            if (k >= u) {
                upper += counts[k];
            }
        }
        out.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        return out;
    }

    const double dm = static_cast<double>(m);
    const double dn = static_cast<double>(n);
    const double dN = static_cast<double>(total);
    const double mean = 0.5 * dm * dn;
    const double variance =
        dm * dn / 12.0 * ((dN + 1.0) - (total > 1 ? tie_term / (dN * (dN - 1.0)) : 0.0));
    if (!(variance > 0.0)) {
        out.p_value = 1.0;
        return out;
    }
    const double z = std::max(0.0, std::abs(out.u - mean) - 0.5) / std::sqrt(variance);
    out.p_value = std::min(1.0, normal_two_sided(z));
    return out;
}

std::vector<double> bh_fdr(std::span<const double> p_values) {
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw Error(ErrorCode::PValueOutOfRange, "p-values must lie in [0, 1]");
        }
    }
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return p_values[i] < p_values[j]; });
    std::vector<double> q(m);
    double running = 1.0;
    for (std::size_t rank = m; rank >= 1; --rank) {
        const std::size_t idx = order[rank - 1];
        // m / rank first so the top rank scales by exactly 1; q never drops below p
        const double scaled = std::max(
            p_values[idx], p_values[idx] * (static_cast<double>(m) / static_cast<double>(rank)));
        running = std::min(running, scaled);
        q[idx] = running;
    }
    return q;
}

NormalityResult normality_gate(std::span<const double> x, double alpha) {
    NormalityResult out;
    if (x.size() < 8) {
        out.warning = true;
        return out;
    }
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (double v : x) {
        const double d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (!(m2 > 0.0)) {
        out.warning = true;
        return out;
    }
    const double skewness = m3 / std::pow(m2, 1.5);
    const double kurtosis = m4 / (m2 * m2);
    out.statistic = n / 6.0 * (skewness * skewness + 0.25 * (kurtosis - 3.0) * (kurtosis - 3.0));
    const double critical =
        boost::math::quantile(boost::math::complement(boost::math::chi_squared(2.0), alpha));
    out.verdict = out.statistic <= critical ? Normality::Normal : Normality::NonNormal;
    return out;
}

KruskalWallisResult kruskal_wallis(const std::vector<std::vector<double>> &groups) {
    std::vector<double> pooled;
    std::vector<std::size_t> sizes;
    for (const auto &g : groups) {
        if (g.empty()) {
            continue;
        }
        pooled.insert(pooled.end(), g.begin(), g.end());
        sizes.push_back(g.size());
    }
    KruskalWallisResult out;
    if (sizes.size() < 2) {
        return out;
    }
    const auto ranks = midranks(pooled);
    const double n = static_cast<double>(pooled.size());
    double sum = 0.0;
    std::size_t offset = 0;
    for (std::size_t size : sizes) {
        double r = 0.0;
        for (std::size_t i = 0; i < size; ++i) {
            r += ranks[offset + i];
        }
        sum += r * r / static_cast<double>(size);
        offset += size;
    }
    double h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);

    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) {
            ++j;
        }
        const double t = static_cast<double>(j - i);
        tie_term += t * t * t - t;
        i = j;
    }
    const double correction = 1.0 - tie_term / (n * n * n - n);
    out.degrees_of_freedom = static_cast<double>(sizes.size() - 1);
    if (!(correction > 0.0)) {
        return out;
    }
    h /= correction;
    out.statistic = std::max(0.0, h);
    out.p_value = chi_squared_upper(out.statistic, out.degrees_of_freedom);
    return out;
}

const char *to_string(TestKind kind) {
    return kind == TestKind::WelchT ? "welch_t" : "wilcoxon";
}

UnivariateResult compare_groups(std::string variable, std::span<const double> a,
                                std::span<const double> b, double alpha) {
    UnivariateResult out;
    out.variable = std::move(variable);
    const bool normal = normality_gate(a, alpha).verdict == Normality::Normal &&
                        normality_gate(b, alpha).verdict == Normality::Normal;
    if (normal) {
        const auto t = welch_t(a, b);
        out.test_used = TestKind::WelchT;
        out.statistic = t.statistic;
        out.p_value = t.p_value;
        out.zero_variance = t.zero_variance;
    } else {
        const auto w = wilcoxon_rank_sum(a, b);
        out.test_used = TestKind::Wilcoxon;
        out.statistic = w.u;
        out.p_value = w.p_value;
    }
    return out;
}

void assign_q_values(std::vector<UnivariateResult> &results) {
    std::vector<double> p;
    p.reserve(results.size());
    for (const auto &r : results) {
        p.push_back(r.p_value);
    }
    const auto q = bh_fdr(p);
    for (std::size_t i = 0; i < results.size(); ++i) {
        results[i].q_value = q[i];
    }
}

} // namespace edpredict::stats
