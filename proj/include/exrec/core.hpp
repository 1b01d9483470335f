#pragma once

// Domain types shared by every pipeline stage.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace exrec {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kToolVersion = "1.0.0";

// Error categories map onto the CLI exit codes (2, 3, 4).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvariantError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

enum class Limb : std::uint8_t { Arm, Leg };
enum class Side : std::uint8_t { Left, Right };
enum class Provenance : std::uint8_t { Original, Inverted, Rotated, InvertedRotated };

std::string_view to_string(Limb limb);
std::string_view to_string(Side side);
std::string_view to_string(Provenance provenance);

Limb parse_limb(std::string_view text);
Side parse_side(std::string_view text);
Provenance parse_provenance(std::string_view text);

struct TriaxialSample {
    double t = 0.0;
    double ax = 0.0;
    double ay = 0.0;
    double az = 0.0;

    bool operator==(const TriaxialSample&) const = default;
};

// Ordered class names; the index of a name is its position in the
// probability vectors produced downstream.
class LabelSet {
public:
    LabelSet() = default;
    explicit LabelSet(std::vector<std::string> names);

    // 18 exercise classes plus the background class, Null first.
    static LabelSet exercise_default();

    std::size_t size() const { return names_.size(); }
    bool empty() const { return names_.empty(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::string& name(std::size_t index) const { return names_.at(index); }

    std::optional<std::size_t> find(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;  // throws DataError
    bool contains(std::string_view name) const { return find(name).has_value(); }

    bool operator==(const LabelSet& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

inline constexpr std::string_view kNullLabel = "null";

struct WindowMeta {
    std::string subject;
    Limb limb = Limb::Arm;
    Side side = Side::Left;
    std::size_t label = 0;  // index into the run's LabelSet
    Provenance provenance = Provenance::Original;
    std::size_t window_index = 0;  // position within its source stream

    bool operator==(const WindowMeta&) const = default;
};

struct TriaxialWindow {
    WindowMeta meta;
    std::vector<TriaxialSample> samples;

    double start_time() const { return samples.empty() ? 0.0 : samples.front().t; }
};

struct ValidationResult {
    bool ok = true;
    std::string rule;  // "length", "finiteness", "time", "label"
    std::size_t index = 0;
    std::string message;

    explicit operator bool() const { return ok; }
};

ValidationResult validate_window(const TriaxialWindow& window, std::size_t expected_length);
ValidationResult validate_window(const TriaxialWindow& window, std::size_t expected_length,
                                 const LabelSet& labels);

// Window length for a sampling rate and duration; throws ConfigError when
// the product is not a positive integer.
std::size_t window_length(double rate_hz, double window_seconds);

}  // namespace exrec
