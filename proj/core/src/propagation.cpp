#include "motionflow/propagation.hpp"

#include <algorithm>
#include <atomic>
#include <functional>
#include <mutex>
#include <sstream>
#include <thread>

#include "motionflow/errors.hpp"
#include "motionflow/warp.hpp"

namespace motionflow {

namespace {

// Index-sharded work loop: unit i writes only slot i, so results are
// identical for any thread count.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    threads = std::clamp(threads, 1, n);
    if (threads <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr err;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!err) err = std::current_exception();
                    next.store(n);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::labeled: return "labeled";
        case Provenance::propagated: return "propagated";
        case Provenance::compensated: return "compensated";
    }
    return "unknown";
}

PropagatedPair joint_propagate(const Frame& anchor_frame, const LabelMask& anchor_label,
                               const FlowField& flow, int num_classes) {
    detail::require(anchor_frame.height == anchor_label.height &&
                        anchor_frame.width == anchor_label.width,
                    "joint_propagate: frame and label shapes differ");
    PropagatedPair pair;
    pair.frame = forward_warp(anchor_frame, flow).frame;
    pair.label = forward_warp_labels(anchor_label, flow, num_classes);
    pair.provenance = Provenance::propagated;
    return pair;
}

std::vector<int> validate_sequence(const SparseSequence& seq) {
    detail::require(!seq.frames.empty(), "sequence: no frames");
    detail::require(seq.interval >= 0, "sequence: interval must be >= 0");
    detail::require(seq.num_classes >= 1, "sequence: num_classes must be >= 1");
    const Frame& first = seq.frames.front();
    for (const Frame& f : seq.frames)
        detail::require(f.same_shape(first), "sequence: frame shapes differ");

    const int total = static_cast<int>(seq.frames.size());
    const int stride = seq.interval + 1;
    std::vector<int> labeled;
    for (int i = 0; i < total; i += stride) {
        detail::require(seq.labels.count(i) != 0,
                        "sequence: missing label at index " + std::to_string(i));
        labeled.push_back(i);
    }
    detail::require(static_cast<int>(seq.labels.size()) == static_cast<int>(labeled.size()),
                    "sequence: labels present off the labeled stride");
    for (const auto& [idx, mask] : seq.labels) {
        detail::require(idx >= 0 && idx < total && idx % stride == 0,
                        "sequence: label index " + std::to_string(idx) + " off the stride");
        detail::require(mask.height == first.height && mask.width == first.width,
                        "sequence: label shape differs at index " + std::to_string(idx));
        for (std::int32_t id : mask.ids)
            detail::require(id >= 0 && id < seq.num_classes,
                            "sequence: class id out of range at index " + std::to_string(idx));
    }
    return labeled;
}

std::vector<PropagatedPair> multistep_propagate(const SparseSequence& seq, int anchor_index,
                                                int k_max, Direction direction,
                                                const EstimatorConfig& cfg) {
    const int total = static_cast<int>(seq.frames.size());
    detail::require(anchor_index >= 0 && anchor_index < total,
                    "multistep_propagate: anchor out of range");
    detail::require(seq.labels.count(anchor_index) != 0,
                    "multistep_propagate: anchor is not labeled");
    detail::require(k_max >= 0, "multistep_propagate: k_max must be >= 0");
    const int dir = direction == Direction::forward ? 1 : -1;
    const int last = anchor_index + dir * k_max;
    detail::require(last >= 0 && last < total, "multistep_propagate: chain leaves the sequence");

    std::vector<PropagatedPair> out;
    out.reserve(k_max);
    Frame cur_frame = seq.frames[anchor_index];
    LabelMask cur_label = seq.labels.at(anchor_index);
    for (int j = 1; j <= k_max; ++j) {
        const int prev = anchor_index + dir * (j - 1);
        const int next = anchor_index + dir * j;
        // Flow comes from the raw neighboring frames; it is applied to the
        // propagated pair so label and appearance stay in lockstep.
        EstimateResult est = estimate_flow(seq.frames[prev], seq.frames[next], cfg);
        PropagatedPair pair = joint_propagate(cur_frame, cur_label, est.flow, seq.num_classes);
        pair.source_index = anchor_index;
        pair.target_index = next;
        pair.step = dir * j;
        pair.time = next;
        cur_frame = pair.frame;
        cur_label = pair.label;
        out.push_back(std::move(pair));
    }
    return out;
}

namespace {

struct ChainTask {
    int anchor = 0;
    Direction direction = Direction::forward;
    int k = 0;
};

}  // namespace

TrainingSet rearrange_dataset(const SparseSequence& seq, const EstimatorConfig& cfg,
                              const CompensatorConfig& ccfg, int threads, int max_step) {
    const std::vector<int> anchors = validate_sequence(seq);
    detail::require(threads >= 1, "rearrange_dataset: threads must be >= 1");
    detail::require(max_step >= 0, "rearrange_dataset: max_step must be >= 0");
    const int total = static_cast<int>(seq.frames.size());
    const int stride = seq.interval + 1;

    TrainingSet set;
    for (int a : anchors) {
        PropagatedPair pair;
        pair.frame = seq.frames[a];
        pair.label = seq.labels.at(a);
        pair.source_index = a;
        pair.target_index = a;
        pair.step = 0;
        pair.time = a;
        pair.provenance = Provenance::labeled;
        set.labeled.push_back(std::move(pair));
    }

    // Every unlabeled index is claimed by its nearest anchor, the earlier one
    // on ties, which splits each gap into a forward run from the left anchor
    // and a backward run from the right anchor.
    std::vector<ChainTask> tasks;
    for (std::size_t ai = 0; ai < anchors.size(); ++ai) {
        const int a = anchors[ai];
        const bool is_last = ai + 1 == anchors.size();
        const int gap = is_last ? total - 1 - a : stride - 1;
        const int forward_k = is_last ? gap : gap - gap / 2;
        const int backward_k = is_last ? 0 : gap / 2;
        if (forward_k > 0) tasks.push_back({a, Direction::forward, forward_k});
        if (backward_k > 0) tasks.push_back({anchors[ai + 1], Direction::backward, backward_k});
    }
    if (max_step > 0) {
        for (const ChainTask& t : tasks) {
            if (t.k > max_step) {
                std::ostringstream msg;
                msg << "cannot cover frame "
                    << (t.anchor + (t.direction == Direction::forward ? t.k : -t.k))
                    << ": nearest anchor " << t.anchor << " needs " << t.k
                    << " steps but max_step is " << max_step;
                throw PipelineError(msg.str());
            }
        }
    }

    std::vector<std::vector<PropagatedPair>> chain_results(tasks.size());
    parallel_for(static_cast<int>(tasks.size()), threads, [&](int i) {
        const ChainTask& t = tasks[i];
        chain_results[i] = multistep_propagate(seq, t.anchor, t.k, t.direction, cfg);
    });
    for (auto& chain : chain_results)
        for (auto& pair : chain) set.relabeled.push_back(std::move(pair));
    std::sort(set.relabeled.begin(), set.relabeled.end(),
              [](const PropagatedPair& x, const PropagatedPair& y) {
                  return x.target_index < y.target_index;
              });

    // The rearranged sequence in temporal order: raw pairs at anchors,
    // propagated pairs elsewhere.
    std::vector<const PropagatedPair*> elements(total, nullptr);
    for (const PropagatedPair& p : set.labeled) elements[p.target_index] = &p;
    for (const PropagatedPair& p : set.relabeled) elements[p.target_index] = &p;
    for (int i = 0; i < total; ++i) {
        if (!elements[i])
            throw PipelineError("no element covers frame " + std::to_string(i));
    }

    set.compensated.resize(total > 0 ? total - 1 : 0);
    parallel_for(total - 1, threads, [&](int i) {
        const Frame& begin = elements[i]->frame;
        const Frame& end = elements[i + 1]->frame;
        auto [fwd, bwd] = estimate_bidirectional(begin, end, cfg);
        IntermediateFlows init =
            approximate_intermediate_flows(fwd.flow, bwd.flow, ccfg.time);
        RefineResult refined = refine_flows(begin, end, init, ccfg);
        auto [frame, label] =
            interpolate_pair(begin, elements[i]->label, refined.flows, seq.num_classes);
        PropagatedPair pair;
        pair.frame = std::move(frame);
        pair.label = std::move(label);
        pair.source_index = i;
        pair.target_index = i;
        pair.step = 0;
        pair.time = i + ccfg.time;
        pair.provenance = Provenance::compensated;
        set.compensated[i] = std::move(pair);
    });
    return set;
}

}  // namespace motionflow
