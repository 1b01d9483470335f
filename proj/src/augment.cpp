#include "exrec/augment.hpp"

#include <algorithm>

namespace exrec::augment {

TriaxialSample invert_sample(const TriaxialSample& s, Limb limb) {
    TriaxialSample out = s;
    if (limb == Limb::Arm) {
        out.ax = -s.ax;
    } else {
        out.ay = -s.ay;
    }
    return out;
}

TriaxialSample rotate_sample(const TriaxialSample& s) {
    return TriaxialSample{s.t, s.ax, -s.ay, -s.az};
}

namespace {

bool has_inversion(Provenance p) {
    return p == Provenance::Inverted || p == Provenance::InvertedRotated;
}

bool has_rotation(Provenance p) {
    return p == Provenance::Rotated || p == Provenance::InvertedRotated;
}

Provenance from_flags(bool inverted, bool rotated) {
    if (inverted && rotated) return Provenance::InvertedRotated;
    if (inverted) return Provenance::Inverted;
    if (rotated) return Provenance::Rotated;
    return Provenance::Original;
}

}  // namespace

Provenance compose(Provenance current, Provenance applied) {
    return from_flags(has_inversion(current) != has_inversion(applied),
                      has_rotation(current) != has_rotation(applied));
}

TriaxialWindow invert_axis(const TriaxialWindow& w) {
    TriaxialWindow out;
    out.meta = w.meta;
    out.meta.provenance = compose(w.meta.provenance, Provenance::Inverted);
    out.samples.reserve(w.samples.size());
    for (const auto& s : w.samples) out.samples.push_back(invert_sample(s, w.meta.limb));
    return out;
}

TriaxialWindow rotate_180_x(const TriaxialWindow& w) {
    TriaxialWindow out;
    out.meta = w.meta;
    out.meta.provenance = compose(w.meta.provenance, Provenance::Rotated);
    out.samples.reserve(w.samples.size());
    for (const auto& s : w.samples) out.samples.push_back(rotate_sample(s));
    return out;
}

TriaxialWindow apply(const TriaxialWindow& w, Provenance target) {
    switch (target) {
        case Provenance::Original: return w;
        case Provenance::Inverted: return invert_axis(w);
        case Provenance::Rotated: return rotate_180_x(w);
        case Provenance::InvertedRotated: return rotate_180_x(invert_axis(w));
    }
    return w;
}

void validate_policy(const Policy& policy) {
    for (std::size_t i = 0; i < policy.size(); ++i) {
        if (policy[i] == Provenance::Original) {
            throw ConfigError("augmentation policy may not contain Original");
        }
        if (std::find(policy.begin(), policy.begin() + static_cast<std::ptrdiff_t>(i), policy[i]) !=
            policy.begin() + static_cast<std::ptrdiff_t>(i)) {
            throw ConfigError("augmentation policy lists " + std::string(to_string(policy[i])) +
                              " twice");
        }
    }
}

ingest::WindowedDataset augment_dataset(const ingest::WindowedDataset& dataset,
                                        const Policy& policy) {
    validate_policy(policy);
    ingest::WindowedDataset out;
    out.label_set = dataset.label_set;
    out.windows.reserve(dataset.windows.size() * (1 + policy.size()));
    out.windows = dataset.windows;
    for (auto target : policy) {
        for (const auto& w : dataset.windows) out.windows.push_back(apply(w, target));
    }
    return out;
}

}  // namespace exrec::augment
