#pragma once

// Placement-variant copies of windows: contralateral wear (axis inversion)
// and upside-down wear (180 degree rotation about the sensor x-axis).

#include <vector>

#include "exrec/core.hpp"
#include "exrec/ingest.hpp"

namespace exrec::augment {

// Arm: (x, y, z) -> (-x, y, z). Leg: (x, y, z) -> (x, -y, z).
TriaxialSample invert_sample(const TriaxialSample& s, Limb limb);

// (x, y, z) -> (x, -y, -z).
TriaxialSample rotate_sample(const TriaxialSample& s);

TriaxialWindow invert_axis(const TriaxialWindow& w);
TriaxialWindow rotate_180_x(const TriaxialWindow& w);

// Provenance after applying a transform on top of an existing one; both
// transforms are involutions and commute, so composition is XOR-like.
Provenance compose(Provenance current, Provenance applied);

// Applies the transform(s) that take an Original window to `target`.
TriaxialWindow apply(const TriaxialWindow& w, Provenance target);

using Policy = std::vector<Provenance>;

inline Policy default_policy() { return {Provenance::Inverted, Provenance::Rotated}; }

// Original block followed by one transformed block per policy entry, in
// policy order. Subject, limb, side and label are preserved.
ingest::WindowedDataset augment_dataset(const ingest::WindowedDataset& dataset,
                                        const Policy& policy);

void validate_policy(const Policy& policy);

}  // namespace exrec::augment
