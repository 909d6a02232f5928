#include "edpredict/stat_tests.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

#include <random>

#include <doctest.h>

using namespace edpredict;
using namespace edpredict::stats;
using testing::error_code_of;

TEST_CASE("Welch t") {
    SUBCASE("identical samples") {
        const std::vector<double> a{1, 2, 3, 4};
        const auto r = welch_t(a, a);
        CHECK(r.statistic == 0.0);
        CHECK(r.p_value == doctest::Approx(1.0));
    }
    SUBCASE("shifted samples agree with the incomplete-beta oracle") {
        const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 3, 4, 5, 6};
        const auto r = welch_t(a, b);
        const auto o = oracle::welch(a, b);
        CHECK(r.statistic == doctest::Approx(o.t));
        CHECK(r.degrees_of_freedom == doctest::Approx(o.df));
        CHECK(std::fabs(r.p_value - o.p) < 1e-6);
        // t-table: t = -1 on 8 df is p = 0.3466
        CHECK(r.p_value == doctest::Approx(0.3466).epsilon(1e-3));
    }
    SUBCASE("random unequal-variance samples") {
        std::mt19937 rng(3);
        std::normal_distribution<double> n1(0.0, 1.0), n2(0.4, 3.0);
        for (int rep = 0; rep < 50; ++rep) {
            std::vector<double> a(5 + rep % 7), b(3 + rep % 11);
            for (auto &v : a) v = n1(rng);
            for (auto &v : b) v = n2(rng);
            const auto o = oracle::welch(a, b);
            CHECK(std::fabs(welch_t(a, b).p_value - o.p) < 1e-6);
        }
    }
    SUBCASE("constant samples") {
        const std::vector<double> a{0, 0, 0, 0}, b{10, 10, 10, 10};
        const auto r = welch_t(a, b);
        CHECK(r.zero_variance);
        CHECK(r.p_value == 0.0);
    }
    SUBCASE("too few values") {
        const std::vector<double> a{1.0}, b{1, 2, 3};
        CHECK(error_code_of([&] { welch_t(a, b); }) == ErrorCode::SampleTooSmall);
    }
}

TEST_CASE("Wilcoxon rank-sum") {
    SUBCASE("complete separation of three against three") {
        const std::vector<double> a{1, 2, 3}, b{4, 5, 6};
        const auto r = wilcoxon_rank_sum(a, b);
        CHECK(r.exact);
        CHECK(r.u == 0.0);
        CHECK(r.p_value == doctest::Approx(0.1));
    }
    SUBCASE("identical samples") {
        const std::vector<double> a{1, 4, 2, 8};
        const auto r = wilcoxon_rank_sum(a, a);
        CHECK(r.u == 8.0);
        CHECK(r.p_value == doctest::Approx(1.0));
    }
    SUBCASE("interleaved samples match permutation enumeration") {
        const std::vector<double> a{1, 3, 5, 7}, b{2, 4, 6, 8};
        CHECK(wilcoxon_rank_sum(a, b).p_value ==
              doctest::Approx(oracle::permutation_rank_sum_p(a, b)).epsilon(1e-12));
    }
    SUBCASE("U agrees with pair counting, ties included") {
        std::mt19937 rng(17);
        std::uniform_int_distribution<int> v(0, 6);
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> a(1 + rep % 9), b(1 + rep % 13);
            for (auto &x : a) x = v(rng);
            for (auto &x : b) x = v(rng);
            CHECK(wilcoxon_rank_sum(a, b).u == doctest::Approx(oracle::mann_whitney_u(a, b)));
        }
    }
    SUBCASE("large samples use the normal approximation") {
        std::vector<double> a, b;
        for (int i = 0; i < 40; ++i) {
            a.push_back(i);
            b.push_back(i + 10.5);
        }
        const auto r = wilcoxon_rank_sum(a, b);
        CHECK_FALSE(r.exact);
        CHECK(r.p_value > 0.0);
        CHECK(r.p_value < 0.05);
    }
    SUBCASE("empty sample") {
        const std::vector<double> a, b{1, 2};
        CHECK(error_code_of([&] { wilcoxon_rank_sum(a, b); }) == ErrorCode::EmptySample);
    }
}

TEST_CASE("Benjamini-Hochberg") {
    const std::vector<double> p{0.01, 0.02, 0.03, 0.04};
    for (double q : bh_fdr(p)) CHECK(q == doctest::Approx(0.04));
    CHECK(bh_fdr(std::vector<double>{1.0}) == std::vector<double>{1.0});
    CHECK(bh_fdr(std::vector<double>{}).empty());

    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 30; ++rep) {
        std::vector<double> values(20);
        for (auto &v : values) v = std::pow(u(rng), 3.0);
        values[3] = values[7]; // a tie
        const auto got = bh_fdr(values);
        const auto want = oracle::bh(values);
        for (std::size_t i = 0; i < values.size(); ++i) {
            CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
            CHECK(got[i] >= values[i]);
        }
        // monotone in p
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        const auto qs = bh_fdr(sorted);
        for (std::size_t i = 1; i < qs.size(); ++i) CHECK(qs[i] >= qs[i - 1]);
    }
    CHECK(error_code_of([] { bh_fdr(std::vector<double>{0.5, 1.5}); }) ==
          ErrorCode::PValueOutOfRange);
    CHECK(error_code_of([] { bh_fdr(std::vector<double>{std::nan("")}); }) ==
          ErrorCode::PValueOutOfRange);
}

TEST_CASE("normality gate") {
    int normal_passes = 0;
    int lognormal_rejections = 0;
    for (unsigned seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n(0.0, 1.0);
        std::vector<double> x(500), y(500);
        for (auto &v : x) v = n(rng);
        for (auto &v : y) v = std::exp(n(rng));
        normal_passes += normality_gate(x).verdict == Normality::Normal;
        lognormal_rejections += normality_gate(y).verdict == Normality::NonNormal;
    }
    CHECK(normal_passes >= 18);
    CHECK(lognormal_rejections == 20);

    const auto small = normality_gate(std::vector<double>{1, 2, 3, 4, 5});
    CHECK(small.verdict == Normality::NonNormal);
    CHECK(small.warning);
}

TEST_CASE("Kruskal-Wallis") {
    // two groups: H equals the squared normal score of the rank-sum test without continuity
    const std::vector<std::vector<double>> groups{{1, 2, 3, 4}, {5, 6, 7, 8}};
    const auto r = kruskal_wallis(groups);
    CHECK(r.degrees_of_freedom == 1.0);
    // H = 12/(N(N+1)) sum R_i^2/n_i - 3(N+1) with R = 10, 26
    const double h = 12.0 / (8 * 9) * (100.0 / 4 + 676.0 / 4) - 3 * 9;
    CHECK(r.statistic == doctest::Approx(h));
    CHECK(kruskal_wallis({{1, 1, 1}, {1, 1}}).p_value == doctest::Approx(1.0));
}

TEST_CASE("midranks average ties") {
    const auto r = midranks(std::vector<double>{10, 20, 20, 5});
    CHECK(r == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("group comparison chooses the test from the normality gate") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> a(300), b(300);
    for (auto &v : a) v = n(rng);
    for (auto &v : b) v = n(rng) + 0.3;
    CHECK(compare_groups("x", a, b).test_used == TestKind::WelchT);
    std::vector<double> c{1, 2, 2, 3, 1};
    CHECK(compare_groups("x", c, c).test_used == TestKind::Wilcoxon);

    std::vector<UnivariateResult> results{compare_groups("a", a, b), compare_groups("c", c, c)};
    assign_q_values(results);
    const auto q = bh_fdr(std::vector<double>{results[0].p_value, results[1].p_value});
    CHECK(results[0].q_value == q[0]);
    CHECK(results[1].q_value == q[1]);
}
