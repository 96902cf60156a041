#pragma once

#include <map>
#include <string>
#include <vector>

#include "motionflow/cycle.hpp"
#include "motionflow/flow_estimator.hpp"
#include "motionflow/image.hpp"

namespace motionflow {

// Ordered frames with labels at a fixed stride of interval+1: indices
// 0, interval+1, 2(interval+1), ... are labeled.
struct SparseSequence {
    std::vector<Frame> frames;
    std::map<int, LabelMask> labels;
    int interval = 0; // unlabeled frames between consecutive labeled frames
    int num_classes = 1;
};

enum class Provenance { labeled, propagated, compensated };

const char* provenance_name(Provenance p);

struct PropagatedPair {
    Frame frame;
    LabelMask label;
    int source_index = 0;  // labeled anchor (or left endpoint for compensated pairs)
    int target_index = 0;  // nominal temporal position (left endpoint for compensated pairs)
    int step = 0;          // signed propagation step count, 0 for labeled/compensated
    double time = 0.0;     // fractional position, target_index + 0.5 for compensated pairs
    Provenance provenance = Provenance::labeled;
};

struct TrainingSet {
    std::vector<PropagatedPair> labeled;     // raw frame-label pairs
    std::vector<PropagatedPair> relabeled;   // one per unlabeled index, jointly propagated
    std::vector<PropagatedPair> compensated; // one midpoint per consecutive element pair
};

// Warps the frame and the label by the same flow and pairs the outputs.
PropagatedPair joint_propagate(const Frame& anchor_frame, const LabelMask& anchor_label,
                               const FlowField& flow, int num_classes);

enum class Direction { forward, backward };

// Chained propagation from a labeled anchor. At step j the flow is estimated
// between the raw frames at (anchor +- (j-1), anchor +- j) and applied to the
// previously propagated pair, so raw frames serve only for flow estimation.
std::vector<PropagatedPair> multistep_propagate(const SparseSequence& seq, int anchor_index,
                                                int k_max, Direction direction,
                                                const EstimatorConfig& cfg);

// Checks the SparseSequence invariants, throwing std::invalid_argument on
// violation. Returns the labeled indices in order.
std::vector<int> validate_sequence(const SparseSequence& seq);

// Builds the full training set: labeled pairs verbatim, every unlabeled index
// filled from its nearest labeled anchor (earlier anchor on ties), and one
// compensated midpoint between every temporally consecutive element of the
// rearranged sequence. Deterministic for any thread count.
TrainingSet rearrange_dataset(const SparseSequence& seq, const EstimatorConfig& cfg,
                              const CompensatorConfig& ccfg, int threads = 1,
                              int max_step = 0);

}  // namespace motionflow
