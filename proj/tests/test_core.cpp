#include <cmath>
#include <limits>

#include "doctest.h"
#include "exrec/core.hpp"

using namespace exrec;

namespace {

TriaxialWindow ramp_window(std::size_t n) {
    TriaxialWindow w;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / 50.0;
        w.samples.push_back({t, 0.1 * static_cast<double>(i), 1.0, -1.0});
    }
    return w;
}

}  // namespace

TEST_CASE("validate_window accepts a well-formed window") {
    CHECK(validate_window(ramp_window(50), 50).ok);
}

TEST_CASE("validate_window rejects short windows with the length rule") {
    auto r = validate_window(ramp_window(49), 50);
    CHECK_FALSE(r.ok);
    CHECK(r.rule == "length");
}

TEST_CASE("validate_window reports the first non-finite sample") {
    auto w = ramp_window(50);
    w.samples[17].ay = std::numeric_limits<double>::quiet_NaN();
    w.samples[30].az = std::numeric_limits<double>::infinity();
    auto r = validate_window(w, 50);
    CHECK_FALSE(r.ok);
    CHECK(r.rule == "finiteness");
    CHECK(r.index == 17);
}

TEST_CASE("validate_window requires strictly increasing time") {
    auto w = ramp_window(50);
    w.samples[10].t = w.samples[9].t;
    auto r = validate_window(w, 50);
    CHECK(r.rule == "time");
    CHECK(r.index == 10);
}

TEST_CASE("validate_window checks the label against the label set") {
    auto w = ramp_window(50);
    w.meta.label = 5;
    CHECK(validate_window(w, 50, LabelSet({"null", "a"})).rule == "label");
}

TEST_CASE("LabelSet is a bijection onto 0..K-1") {
    const auto labels = LabelSet::exercise_default();
    CHECK(labels.size() == 19);
    CHECK(labels.name(0) == "null");
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(labels.index_of(labels.name(i)) == i);
    CHECK_THROWS_AS(LabelSet({"a", "b", "a"}), ConfigError);
    CHECK_THROWS_AS(labels.index_of("swimming"), DataError);
}

TEST_CASE("window_length needs an integral sample count") {
    CHECK(window_length(50.0, 1.0) == 50);
    CHECK(window_length(32.0, 2.0) == 64);
    CHECK_THROWS_AS(window_length(50.0, 0.33), ConfigError);
    CHECK_THROWS_AS(window_length(0.0, 1.0), ConfigError);
}

TEST_CASE("enum names round-trip") {
    CHECK(parse_limb(to_string(Limb::Leg)) == Limb::Leg);
    CHECK(parse_side(to_string(Side::Right)) == Side::Right);
    for (auto p : {Provenance::Original, Provenance::Inverted, Provenance::Rotated,
                   Provenance::InvertedRotated}) {
        CHECK(parse_provenance(to_string(p)) == p);
    }
    CHECK_THROWS_AS(parse_limb("torso"), ConfigError);
}
