#include "exrec/core.hpp"

#include <cmath>

namespace exrec {

std::string_view to_string(Limb limb) {
    return limb == Limb::Arm ? "arm" : "leg";
}

std::string_view to_string(Side side) {
    return side == Side::Left ? "left" : "right";
}

std::string_view to_string(Provenance provenance) {
    switch (provenance) {
        case Provenance::Original: return "Original";
        case Provenance::Inverted: return "Inverted";
        case Provenance::Rotated: return "Rotated";
        case Provenance::InvertedRotated: return "InvertedRotated";
    }
    return "Original";
}

Limb parse_limb(std::string_view text) {
    if (text == "arm" || text == "Arm") return Limb::Arm;
    if (text == "leg" || text == "Leg") return Limb::Leg;
    throw ConfigError("unknown limb '" + std::string(text) + "' (expected arm or leg)");
}

Side parse_side(std::string_view text) {
    if (text == "left" || text == "Left") return Side::Left;
    if (text == "right" || text == "Right") return Side::Right;
    throw DataError("unknown side '" + std::string(text) + "'");
}

Provenance parse_provenance(std::string_view text) {
    if (text == "Original") return Provenance::Original;
    if (text == "Inverted") return Provenance::Inverted;
    if (text == "Rotated") return Provenance::Rotated;
    if (text == "InvertedRotated") return Provenance::InvertedRotated;
    throw ConfigError("unknown augmentation provenance '" + std::string(text) + "'");
}

LabelSet::LabelSet(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        auto [it, inserted] = index_.emplace(names_[i], i);
        if (!inserted) throw ConfigError("duplicate label '" + names_[i] + "' in label set");
    }
}

LabelSet LabelSet::exercise_default() {
    return LabelSet({
        std::string(kNullLabel),
        "jogging",
        "jogging (rotating arms)",
        "jogging (skipping)",
        "jogging (sidesteps)",
        "jogging (butt-kicks)",
        "stretching (triceps)",
        "stretching (lunging)",
        "stretching (shoulders)",
        "stretching (hamstrings)",
        "stretching (lumbar rotation)",
        "push-ups",
        "push-ups (complex)",
        "sit-ups",
        "sit-ups (complex)",
        "burpees",
        "lunges",
        "lunges (complex)",
        "bench-dips",
    });
}

std::optional<std::size_t> LabelSet::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t LabelSet::index_of(std::string_view name) const {
    if (auto idx = find(name)) return *idx;
    throw DataError("label '" + std::string(name) + "' is not in the configured label set");
}

namespace {

ValidationResult reject(std::string rule, std::size_t index, std::string message) {
    return ValidationResult{false, std::move(rule), index, std::move(message)};
}

}  // namespace

ValidationResult validate_window(const TriaxialWindow& window, std::size_t expected_length) {
    const auto& s = window.samples;
    if (s.size() != expected_length) {
        return reject("length", s.size(),
                      "window has " + std::to_string(s.size()) + " samples, expected " +
                          std::to_string(expected_length));
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!std::isfinite(s[i].ax) || !std::isfinite(s[i].ay) || !std::isfinite(s[i].az) ||
            !std::isfinite(s[i].t)) {
            return reject("finiteness", i, "non-finite value at sample " + std::to_string(i));
        }
        if (i > 0 && !(s[i].t > s[i - 1].t)) {
            return reject("time", i, "sample time not strictly increasing at sample " +
                                         std::to_string(i));
        }
    }
    return {};
}

ValidationResult validate_window(const TriaxialWindow& window, std::size_t expected_length,
                                 const LabelSet& labels) {
    auto result = validate_window(window, expected_length);
    if (result && window.meta.label >= labels.size()) {
        return reject("label", window.meta.label,
                      "label index " + std::to_string(window.meta.label) + " outside label set");
    }
    return result;
}

std::size_t window_length(double rate_hz, double window_seconds) {
    const double product = rate_hz * window_seconds;
    const double rounded = std::round(product);
    if (!(product > 0.0) || std::abs(product - rounded) > 1e-9 * std::max(1.0, product)) {
        throw ConfigError("rate x window_seconds must be a positive integer, got " +
                          std::to_string(product));
    }
    return static_cast<std::size_t>(rounded);
}

}  // namespace exrec
