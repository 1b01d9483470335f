#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "exrec/normalize.hpp"

using namespace exrec;
using namespace exrec::normalize;

namespace {

FeatureMatrix single_column(const std::vector<double>& values) {
    FeatureMatrix m({"c"}, values.size());
    for (std::size_t r = 0; r < values.size(); ++r) m.at(r, 0) = values[r];
    return m;
}

// Kolmogorov-Smirnov distance between a sample and Uniform(0, 1).
double ks_uniform(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double d = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        d = std::max(d, std::abs(static_cast<double>(i + 1) / n - v[i]));
        d = std::max(d, std::abs(v[i] - static_cast<double>(i) / n));
    }
    return d;
}

}  // namespace

TEST_CASE("fit stores order statistics") {
    auto q = fit_quantile(single_column({5, 3, 1, 4, 2}), 5);
    CHECK(q.references(0) == std::vector<double>{1, 2, 3, 4, 5});
    auto c = fit_quantile(single_column({7, 7, 7}), 1000);
    CHECK(c.references(0) == std::vector<double>{7, 7, 7});
    CHECK(c.levels() == 3);
    CHECK_THROWS_AS(fit_quantile(single_column({1}), 10), DataError);
}

TEST_CASE("transform interpolates and clips") {
    auto q = fit_quantile(single_column({1, 2, 3, 4, 5}), 5);
    CHECK(q.transform_value(0, 3) == 0.5);
    CHECK(q.transform_value(0, 100) == 1.0);
    CHECK(q.transform_value(0, 1) == 0.0);
    CHECK(q.transform_value(0, -4) == 0.0);
    CHECK(q.transform_value(0, 2.5) == doctest::Approx(0.375));
    auto c = fit_quantile(single_column({7, 7, 7}), 10);
    CHECK(c.transform_value(0, 7) == 0.5);
    CHECK(c.transform_value(0, 100) == 0.5);
}

TEST_CASE("transform is monotone and bounded") {
    std::mt19937_64 rng(4);
    std::lognormal_distribution<double> skew(0.0, 1.5);
    std::vector<double> train(500);
    for (auto& v : train) v = std::round(skew(rng) * 4) / 4;  // ties included
    auto q = fit_quantile(single_column(train), 100);
    std::vector<double> probe(2000);
    for (auto& v : probe) v = skew(rng) * 1.2 - 0.3;
    std::sort(probe.begin(), probe.end());
    double prev = -1.0;
    for (double v : probe) {
        const double t = q.transform_value(0, v);
        CHECK(t >= 0.0);
        CHECK(t <= 1.0);
        CHECK(t >= prev);
        prev = t;
    }
}

TEST_CASE("training marginals become uniform") {
    std::mt19937_64 rng(8);
    std::exponential_distribution<double> e(0.3);
    std::vector<double> train(1500);
    for (auto& v : train) v = std::pow(e(rng), 3.0);
    auto m = single_column(train);
    auto t = transform(fit_quantile(m, 1000), m);
    CHECK(ks_uniform(t.column(0)) < 0.05);
}

TEST_CASE("column mismatch is a schema error") {
    auto q = fit_quantile(single_column({1, 2, 3}), 10);
    FeatureMatrix other({"d"}, 2);
    CHECK_THROWS_AS(transform(q, other), DataError);
}

TEST_CASE("quantile map JSON round trip") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    FeatureMatrix m({"a", "b"}, 40);
    for (std::size_t r = 0; r < 40; ++r) {
        m.at(r, 0) = d(rng);
        m.at(r, 1) = d(rng) * 1e-7;
    }
    auto q = fit_quantile(m, 1000);
    auto back = QuantileMap::from_json(nlohmann::json::parse(q.to_json().dump()));
    CHECK(back == q);
}

TEST_CASE("maps fit on different rows differ") {
    auto a = fit_quantile(single_column({1, 2, 3, 4}), 10);
    auto b = fit_quantile(single_column({1, 2, 3, 8}), 10);
    CHECK(a.transform_value(0, 3.5) != b.transform_value(0, 3.5));
}
