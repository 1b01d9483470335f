#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <set>

#include "doctest.h"
#include "exrec/augment.hpp"
#include "exrec/features.hpp"

using namespace exrec;
using namespace exrec::features;
using doctest::Approx;

namespace {

// Independent reference: brute-force complex DFT, then a full sort of bins by
// (magnitude desc, frequency asc).
std::pair<double, double> oracle_top_two(const std::vector<double>& s, double rate) {
    const std::size_t n = s.size();
    double mean = 0.0;
    for (double v : s) mean += v;
    mean /= static_cast<double>(n);
    std::vector<std::pair<double, std::size_t>> bins;
    for (std::size_t k = 1; k <= n / 2; ++k) {
        std::complex<double> acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            acc += (s[t] - mean) * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k * t) /
                                                       static_cast<double>(n));
        }
        bins.emplace_back(std::abs(acc), k);
    }
    std::stable_sort(bins.begin(), bins.end(),
                     [](auto& a, auto& b) { return a.first > b.first; });
    const double res = rate / static_cast<double>(n);
    return {static_cast<double>(bins[0].second) * res, static_cast<double>(bins[1].second) * res};
}

double oracle_petrosian(const std::vector<double>& s) {
    int prev = 0;
    int changes = 0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double d = s[i] - s[i - 1];
        const int sign = (d > 0) - (d < 0);
        if (sign == 0) continue;
        if (prev != 0 && sign != prev) ++changes;
        prev = sign;
    }
    const double n = static_cast<double>(s.size());
    return std::log(n) / (std::log(n) + std::log(n / (n + 0.4 * changes)));
}

TriaxialWindow random_window(std::mt19937_64& rng, Limb limb) {
    std::normal_distribution<double> d(0.0, 1.5);
    TriaxialWindow w;
    w.meta.limb = limb;
    for (std::size_t i = 0; i < 50; ++i) {
        w.samples.push_back({static_cast<double>(i) / 50.0, d(rng), d(rng), d(rng)});
    }
    return w;
}

std::vector<double> slice(const FeatureVector& fv, std::size_t channel) {
    return {fv.values.begin() + static_cast<std::ptrdiff_t>(channel * kFeaturesPerChannel),
            fv.values.begin() + static_cast<std::ptrdiff_t>((channel + 1) * kFeaturesPerChannel)};
}

}  // namespace

TEST_CASE("catalog has 27/4/14 groups and 450 named columns") {
    std::size_t counts[3] = {0, 0, 0};
    for (const auto& e : catalog()) ++counts[static_cast<int>(e.group)];
    CHECK(counts[0] == 27);
    CHECK(counts[1] == 4);
    CHECK(counts[2] == 14);
    const auto& names = feature_names();
    CHECK(names.size() == 450);
    CHECK(std::set<std::string>(names.begin(), names.end()).size() == 450);
    CHECK(names.front() == "acc_x__mean");
    CHECK(names.back() == "angle_yz__d3_katz_fd");
    std::size_t family[3] = {0, 0, 0};
    for (std::size_t c = 0; c < names.size(); ++c) ++family[static_cast<int>(column_info(c).family)];
    CHECK(family[0] == 135);
    CHECK(family[1] == 180);
    CHECK(family[2] == 135);
}

TEST_CASE("derive_channels arithmetic") {
    TriaxialWindow w;
    w.samples = {{0, 1, 2, 2}, {0.02, 5, 3, 4}, {0.04, 1, 0, 7}, {0.06, 0, 1, 1}};
    auto ch = derive_channels(w);
    CHECK(ch[3].values[0] == 9.0);
    CHECK(ch[6].values[1] == 25.0);
    CHECK(ch[4].values[0] == 5.0);
    CHECK(ch[5].values[0] == 5.0);
    CHECK(ch[7].values[3] == 0.0);
    CHECK(ch[7].values[2] == Approx(std::numbers::pi / 2));
    CHECK(ch[0].values[1] == 5.0);
}

TEST_CASE("angles stay in (-pi, pi]") {
    CHECK(wrapped_angle(-0.0, -1.0) == std::numbers::pi);
    CHECK(wrapped_angle(0.0, -1.0) == std::numbers::pi);
    CHECK(wrapped_angle(-0.0, -0.0) == std::numbers::pi);
    CHECK(wrapped_angle(-1e-300, -1.0) > -std::numbers::pi);
}

TEST_CASE("statistical features on degenerate and simple signals") {
    const std::vector<double> constant{5, 5, 5, 5};
    auto c = extract_statistical(constant, 50.0);
    CHECK(c[0] == 5.0);
    CHECK(c[5] == 0.0);
    CHECK(c[14] == 0.0);   // entropy
    CHECK(c[12] == 0.0);   // mean crossing rate
    CHECK(c[15] == 0.0);   // autocorrelation sentinel
    CHECK(c[2] == 5.0);    // mode

    const std::vector<double> ramp{0, 1, 2, 3};
    auto r = extract_statistical(ramp, 50.0);
    CHECK(r[23] == Approx(1.0));  // slope
    CHECK(r[18] == 1.0);          // mean difference
    CHECK(r[21] == 3.0);          // sum of absolute differences
    CHECK(r[11] == 3.0);          // peak to peak

    const std::vector<double> alt{1, -1, 1, -1};
    auto a = extract_statistical(alt, 50.0);
    CHECK(a[12] == 1.0);
    CHECK(a[8] == 1.0);
    CHECK(a[24] == 1.0);

    CHECK_THROWS_AS(extract_statistical(std::vector<double>{1, 2, 3}, 50.0), DataError);
}

TEST_CASE("statistical features match reference values") {
    // Reference values from numpy (percentile, histogram, polyfit, trapezoid).
    const std::vector<double> x{3, 1, 4, 1, 5, 9, 2, 6};
    auto f = extract_statistical(x, 50.0);
    CHECK(f[0] == Approx(3.875));
    CHECK(f[1] == Approx(3.5));
    CHECK(f[2] == Approx(1.4));
    CHECK(f[3] == 9.0);
    CHECK(f[4] == 1.0);
    CHECK(f[5] == Approx(2.5708704751503917));
    CHECK(f[6] == Approx(6.609375));
    CHECK(f[7] == Approx(3.5));
    CHECK(f[8] == Approx(std::sqrt(21.625)));
    CHECK(f[9] == Approx(21.625));
    CHECK(f[10] == 173.0);
    CHECK(f[11] == 8.0);
    CHECK(f[12] == Approx(5.0 / 7.0));
    CHECK(f[13] == Approx(0.53));
    CHECK(f[14] == Approx(2.75));
    CHECK(f[15] == Approx(-0.17523640661938533));
    CHECK(f[16] == Approx(0.09445086705202312));
    CHECK(f[17] == Approx(27.0 / 7.0));
    CHECK(f[18] == Approx(3.0 / 7.0));
    CHECK(f[19] == Approx(4.0));
    CHECK(f[20] == Approx(3.0));
    CHECK(f[21] == 27.0);
    CHECK(f[22] == Approx(28.00100798655501));
    CHECK(f[23] == Approx(0.5357142857142856));
    CHECK(f[24] == 0.0);
    CHECK(f[25] == 2.0);
    CHECK(f[26] == 3.0);
}

TEST_CASE("Petrosian fractal dimension") {
    CHECK(petrosian_fd(std::vector<double>{0, 1, 2, 3, 4}) == 1.0);
    CHECK(petrosian_fd(std::vector<double>{2, 2, 2, 2}) == 1.0);
    const std::vector<double> zigzag{0, 1, 0, 1, 0, 1, 0, 1};
    CHECK(petrosian_fd(zigzag) == Approx(1.1444).epsilon(1e-3));
    CHECK(petrosian_fd(zigzag) == Approx(oracle_petrosian(zigzag)).epsilon(1e-12));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> s(3 + trial % 60);
        for (auto& v : s) v = trial % 3 == 0 ? std::round(u(rng) * 2) : u(rng);
        const double pfd = petrosian_fd(s);
        CHECK(pfd == Approx(oracle_petrosian(s)).epsilon(1e-12));
        CHECK(pfd >= 1.0);
        CHECK(pfd <= 10.0);
    }
}

TEST_CASE("Katz fractal dimension") {
    CHECK(katz_fd(std::vector<double>{0, 1, 2, 3}) == Approx(1.0));
    CHECK(katz_fd(std::vector<double>{4, 4, 4}) == 1.0);
    CHECK(katz_fd(std::vector<double>{0, 2, 1}) == Approx(2.41).epsilon(1e-2));
    CHECK(katz_fd(std::vector<double>{0, 2, 1}) ==
          Approx(std::log10(2.0) / (std::log10(2.0) + std::log10(2.0 / 3.0))));
    // Excursion ratio below 1/n drives the denominator negative: capped.
    CHECK(katz_fd(std::vector<double>{0, 1, -1, 1, -1}) == 10.0);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> s(2 + trial % 50);
        for (auto& v : s) v = d(rng);
        const double k = katz_fd(s);
        CHECK(k >= 1.0 - 1e-12);
        CHECK(k <= 10.0);
    }
}

TEST_CASE("dominant frequencies") {
    std::vector<double> tone(50), pair(50);
    for (std::size_t i = 0; i < 50; ++i) {
        const double t = static_cast<double>(i) / 50.0;
        tone[i] = std::sin(2 * std::numbers::pi * 5 * t);
        pair[i] = tone[i] + 0.5 * std::sin(2 * std::numbers::pi * 10 * t);
    }
    auto f = dominant_frequencies(tone, 50.0);
    CHECK(f.first == 5.0);
    CHECK(f.second == 0.0);
    auto g = dominant_frequencies(pair, 50.0);
    CHECK(g.first == 5.0);
    CHECK(g.second == 10.0);
    auto c = dominant_frequencies(std::vector<double>(50, 0.1), 50.0);
    CHECK(c.first == 0.0);
    CHECK(c.second == 0.0);

    std::mt19937_64 rng(9);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(32 + trial);
        for (auto& v : s) v = d(rng);
        auto ours = dominant_frequencies(s, 50.0);
        auto ref = oracle_top_two(s, 50.0);
        CHECK(ours.first == Approx(ref.first));
        CHECK(ours.second == Approx(ref.second));
    }
}

TEST_CASE("diff_n") {
    const std::vector<double> sq{0, 1, 4, 9, 16};
    CHECK(diff_n(sq, 2) == std::vector<double>{2, 2, 2});
    CHECK(diff_n(sq, 3) == std::vector<double>{0, 0});
    CHECK(diff_n(sq, 1).size() == 4);
    CHECK_THROWS_AS(diff_n(sq, 5), DataError);
    CHECK_THROWS_AS(diff_n(sq, 0), DataError);
}

TEST_CASE("differential features") {
    const std::vector<double> sq{0, 1, 4, 9, 16};
    auto d = extract_differential(sq);
    const std::array<double, 7> d2{2, 2, 0, 2, 2, 0, 1.0};
    for (std::size_t i = 0; i < 7; ++i) CHECK(d[i] == d2[i]);
    for (std::size_t i = 7; i < 13; ++i) CHECK(d[i] == 0.0);
    CHECK(d[13] == 1.0);
    CHECK(d.size() == 14);
}

TEST_CASE("extract_window layout, determinism and finiteness") {
    std::mt19937_64 rng(1);
    auto w = random_window(rng, Limb::Arm);
    auto a = extract_window(w, 50.0);
    auto b = extract_window(w, 50.0);
    CHECK(a.values.size() == 450);
    CHECK(a.values == b.values);
    for (double v : a.values) CHECK(std::isfinite(v));

    TriaxialWindow still;
    for (std::size_t i = 0; i < 50; ++i) still.samples.push_back({i / 50.0, 0, 0, 0});
    auto z = extract_window(still, 50.0);
    for (double v : z.values) CHECK(std::isfinite(v));

    auto broken = w;
    broken.samples[3].ax = std::nan("");
    CHECK_THROWS_AS(extract_window(broken, 50.0), DataError);
}

TEST_CASE("feature invariants under placement augmentation") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 100; ++trial) {
        auto w = random_window(rng, Limb::Arm);
        if (trial % 10 == 0) w.samples[7].ay = 0.0;
        const auto ch = derive_channels(w);
        const auto rot = derive_channels(augment::rotate_180_x(w));
        for (std::size_t c = 3; c < 7; ++c) CHECK(ch[c].values == rot[c].values);
        for (std::size_t i = 0; i < 50; ++i) {
            double shifted = ch[9].values[i] + std::numbers::pi;
            if (shifted > std::numbers::pi) shifted -= 2 * std::numbers::pi;
            CHECK(rot[9].values[i] == Approx(shifted).epsilon(1e-12));
        }

        const auto fv = extract_window(w, 50.0);
        const auto inv = extract_window(augment::invert_axis(w), 50.0);
        for (std::size_t c : {1u, 2u, 6u, 9u}) CHECK(slice(fv, c) == slice(inv, c));
        const auto x = slice(fv, 0);
        const auto xi = slice(inv, 0);
        CHECK(xi[0] == Approx(-x[0]));
        CHECK(xi[1] == Approx(-x[1]));
        CHECK(xi[3] == -x[4]);
        CHECK(xi[4] == -x[3]);
    }
}

TEST_CASE("extract_matrix is independent of the worker count") {
    std::mt19937_64 rng(2);
    std::vector<TriaxialWindow> windows;
    for (int i = 0; i < 24; ++i) windows.push_back(random_window(rng, Limb::Leg));
    auto one = extract_matrix(windows, 50.0, 1);
    auto four = extract_matrix(windows, 50.0, 4);
    CHECK(one == four);
    CHECK(one.names() == feature_names());
}

TEST_CASE("ANOVA F scores") {
    FeatureMatrix m({"f", "same", "flat"}, 4);
    const double f[] = {1, 2, 3, 4};
    const double same[] = {1, 2, 1, 2};
    const double flat[] = {1, 1, 2, 2};
    for (std::size_t r = 0; r < 4; ++r) {
        m.at(r, 0) = f[r];
        m.at(r, 1) = same[r];
        m.at(r, 2) = flat[r];
    }
    const std::vector<std::size_t> labels{0, 0, 1, 1};
    auto scores = anova_f_scores(m, labels);
    CHECK(scores[0] == Approx(8.0).epsilon(1e-12));
    CHECK(scores[1] == 0.0);
    CHECK(std::isinf(scores[2]));
    CHECK_THROWS_AS(anova_f_scores(m, std::vector<std::size_t>{0, 0, 0, 0}), DataError);
}
