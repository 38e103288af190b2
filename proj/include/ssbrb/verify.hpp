#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "params.hpp"
#include "trace.hpp"
#include "wire.hpp"

namespace ssbrb {

enum class Verdict { Holds, Violated, Inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Holds: return "holds";
        case Verdict::Violated: return "violated";
        case Verdict::Inconclusive: return "inconclusive";
    }
    return "?";
}

/// One property's outcome. `witness` holds indices into the checked
/// trace's event vector; for a violation they form a slice that still
/// exhibits the problem when replayed on its own (see witness_slice).
struct PropertyReport {
    std::string name;
    Verdict verdict = Verdict::Holds;
    std::vector<std::size_t> witness;
    std::string note;
};

/// Typed read model over a recorded trace. Construction validates the
/// structure (header present, ids in range, payload hex decodable) and
/// throws std::runtime_error on anything a checker could misread, so a
/// verdict never encodes a parse failure.
class TraceView {
public:
    struct Delivery {
        std::size_t idx;
        long step;
        int node, inst, slot, round;
        long support;
        bool conflict;
        Value value;
        long epoch;  // unwrapped repetition count of `round`; -1 when unknown
    };
    struct Broadcast {
        std::size_t idx;
        long step;
        int node, inst, slot, round;
        Value value;
        long epoch;
    };
    struct FetchEv {
        std::size_t idx;
        long step;
        int node, inst, from, round;
    };
    struct IncEv {
        std::size_t idx;
        long step;
        int node, inst, round;
    };
    struct TrustEv {
        std::size_t idx;
        long step;
        int node, inst;
        std::uint64_t mask;
    };
    struct ConsistEv {
        std::size_t idx;
        long step;
        int node;
        long round;
        bool ok;
    };
    struct MarkEv {
        std::size_t idx;
        long step;
        long round;
    };

    explicit TraceView(const Trace& tr) : tr_(&tr) {
        if (tr.events.empty()) fail("empty trace");
        long mark_round = -1;
        for (std::size_t idx = 0; idx < tr.events.size(); ++idx) {
            const TraceEvent& e = tr.events[idx];
            if (idx == 0 && e.kind != "config") fail("first event is not config");
            if (e.kind == "config") {
                if (idx != 0) fail("config not first");
                parse_config(e);
            } else if (e.kind == "seed") {
                seed_ = static_cast<std::uint64_t>(req_num(e, "s"));
                have_seed_ = true;
            } else if (e.kind == "correct") {
                correct_mask_ = static_cast<std::uint64_t>(req_num(e, "set"));
                have_correct_ = true;
            } else if (e.kind == "bcast") {
                broadcasts_.push_back({idx, e.step, node_in_range(e), inst_of(e),
                                       id_field(e, "slot"), static_cast<int>(req_num(e, "round")),
                                       value_of(e), req_num(e, "epoch", -1)});
            } else if (e.kind == "deliver") {
                deliveries_.push_back({idx, e.step, node_in_range(e), inst_of(e),
                                       id_field(e, "slot"), static_cast<int>(req_num(e, "round")),
                                       req_num(e, "support"), e.find("conflict") != nullptr,
                                       value_of(e), req_num(e, "epoch", -1)});
            } else if (e.kind == "fetch") {
                fetches_.push_back({idx, e.step, node_in_range(e), inst_of(e),
                                    id_field(e, "from"), static_cast<int>(req_num(e, "round"))});
            } else if (e.kind == "inc") {
                incs_.push_back({idx, e.step, node_in_range(e), inst_of(e),
                                 static_cast<int>(req_num(e, "round"))});
            } else if (e.kind == "trusted") {
                trusteds_.push_back({idx, e.step, node_in_range(e), inst_of(e),
                                     static_cast<std::uint64_t>(req_num(e, "set"))});
            } else if (e.kind == "roundmark") {
                mark_round = req_num(e, "r");
                marks_.push_back({idx, e.step, mark_round});
            } else if (e.kind == "consist") {
                if (mark_round < 0) fail("consist sample before any roundmark");
                consists_.push_back({idx, e.step, node_in_range(e), mark_round,
                                     req_num(e, "ok") == 1});
            } else if (e.kind == "corrupt") {
                corrupt_idx_ = static_cast<long>(idx);
                corrupt_step_ = e.step;
                corrupt_inst_ = static_cast<int>(req_num(e, "inst", -1));
            } else if (e.kind == "cut") {
                suffix_begin_ = idx + 1;
                cut_step_ = e.step;
            } else if (e.kind == "end") {
                end_step_ = e.step;
                const std::string* r = e.find("reason");
                if (!r) fail("end without reason");
                end_reason_ = *r;
                have_end_ = true;
            } else if (e.kind == "purge") {
                // bookkeeping only
            } else {
                fail("unknown event kind: " + e.kind);
            }
        }
        if (!have_config_) fail("missing config");
        if (!have_seed_) fail("missing seed");
        if (!have_correct_) fail("missing correct set");
        if (!have_end_) fail("missing end");
    }

    const Trace& trace() const { return *tr_; }
    const std::string& mode() const { return mode_; }
    bool single_mode() const { return mode_ == "single-brb-async"; }
    int n() const { return n_; }
    int t() const { return t_; }
    int delta() const { return delta_; }
    int modulus() const { return modulus_; }
    int theta() const { return theta_; }
    long horizon() const { return horizon_; }
    long grace() const { return grace_; }
    long settle() const { return settle_; }
    long budget() const { return budget_ > 0 ? budget_ : settle_; }
    long rounds_target() const { return rounds_target_; }
    bool fifo() const { return fifo_; }
    long ploss_permille() const { return ploss_permille_; }
    std::uint64_t seed() const { return seed_; }

    bool correct(int id) const {
        return id >= 0 && id < n_ && ((correct_mask_ >> id) & 1) != 0;
    }
    std::uint64_t correct_mask() const { return correct_mask_; }
    std::vector<int> correct_nodes() const {
        std::vector<int> out;
        for (int i = 0; i < n_; ++i)
            if (correct(i)) out.push_back(i);
        return out;
    }
    const std::map<int, std::string>& adversaries() const { return adversaries_; }
    long adversary_step() const { return adversary_step_; }

    long corrupt_idx() const { return corrupt_idx_; }
    long corrupt_step() const { return corrupt_step_; }
    int corrupt_inst() const { return corrupt_inst_; }
    long cut_step() const { return cut_step_; }
    std::size_t suffix_begin() const { return suffix_begin_; }
    bool in_suffix(std::size_t idx) const { return idx >= suffix_begin_; }
    long end_step() const { return end_step_; }
    const std::string& end_reason() const { return end_reason_; }

    /// Round numbers carry no information when the run never opens
    /// rounds, so they collapse to the sentinel for matching purposes.
    int norm_round(int r) const { return single_mode() ? kNoRound : r; }

    const std::vector<Delivery>& deliveries() const { return deliveries_; }
    const std::vector<Broadcast>& broadcasts() const { return broadcasts_; }
    const std::vector<FetchEv>& fetches() const { return fetches_; }
    const std::vector<IncEv>& incs() const { return incs_; }
    const std::vector<TrustEv>& trusteds() const { return trusteds_; }
    const std::vector<ConsistEv>& consists() const { return consists_; }
    const std::vector<MarkEv>& marks() const { return marks_; }

private:
    [[noreturn]] static void fail(const std::string& why) {
        throw std::runtime_error("malformed trace: " + why);
    }

    static long req_num(const TraceEvent& e, const std::string& key) {
        const std::string* v = e.find(key);
        if (!v) fail("event " + e.kind + " missing key " + key);
        try {
            return std::stol(*v);
        } catch (...) {
            fail("event " + e.kind + " key " + key + " not numeric");
        }
    }

    static long req_num(const TraceEvent& e, const std::string& key, long fallback) {
        if (!e.find(key)) return fallback;
        return req_num(e, key);
    }

    int node_in_range(const TraceEvent& e) const {
        if (e.node < 0 || e.node >= n_) fail("event " + e.kind + " from node out of range");
        return e.node;
    }

    int id_field(const TraceEvent& e, const std::string& key) const {
        const long v = req_num(e, key);
        if (v < 0 || v >= n_) fail("event " + e.kind + " key " + key + " out of range");
        return static_cast<int>(v);
    }

    int inst_of(const TraceEvent& e) const {
        const long v = req_num(e, "inst");
        if (v < 0 || v >= delta_) fail("event " + e.kind + " instance out of range");
        return static_cast<int>(v);
    }

    Value value_of(const TraceEvent& e) const {
        const std::string* v = e.find("value");
        if (!v) fail("event " + e.kind + " missing value");
        auto dec = wire::from_hex(*v);
        if (!dec) fail("event " + e.kind + " value not hex");
        return *dec;
    }

    void parse_config(const TraceEvent& e) {
        const std::string* m = e.find("mode");
        if (!m) fail("config missing mode");
        mode_ = *m;
        n_ = static_cast<int>(req_num(e, "n"));
        t_ = static_cast<int>(req_num(e, "t"));
        delta_ = static_cast<int>(req_num(e, "delta"));
        modulus_ = static_cast<int>(req_num(e, "modulus", 0));
        horizon_ = req_num(e, "horizon", 0);
        grace_ = req_num(e, "grace", 0);
        settle_ = req_num(e, "settle", 0);
        budget_ = req_num(e, "budget", 0);
        rounds_target_ = req_num(e, "rt", 0);
        theta_ = static_cast<int>(req_num(e, "theta", 0));
        fifo_ = req_num(e, "fifo", 0) == 1;
        ploss_permille_ = req_num(e, "ploss", 0);
        adversary_step_ = req_num(e, "advstep", -1);
        if (n_ <= 0 || n_ > 63) fail("config n out of range");
        if (delta_ <= 0) fail("config delta out of range");
        for (const auto& [k, v] : e.kv) {
            if (k.size() > 3 && k.compare(0, 3, "adv") == 0 && k != "advstep") {
                try {
                    adversaries_[std::stoi(k.substr(3))] = v;
                } catch (...) {
                    fail("config adversary key " + k);
                }
            }
        }
        have_config_ = true;
    }

    const Trace* tr_;
    std::string mode_;
    int n_ = 0, t_ = 0, delta_ = 0, modulus_ = 0, theta_ = 0;
    long horizon_ = 0, grace_ = 0, settle_ = 0, budget_ = 0, rounds_target_ = 0,
         ploss_permille_ = 0;
    bool fifo_ = false;
    std::uint64_t seed_ = 0, correct_mask_ = 0;
    std::map<int, std::string> adversaries_;
    long adversary_step_ = -1;
    long corrupt_idx_ = -1, corrupt_step_ = -1;
    int corrupt_inst_ = -1;
    long cut_step_ = -1;
    std::size_t suffix_begin_ = 0;
    long end_step_ = 0;
    std::string end_reason_;
    bool have_config_ = false, have_seed_ = false, have_correct_ = false, have_end_ = false;

    std::vector<Delivery> deliveries_;
    std::vector<Broadcast> broadcasts_;
    std::vector<FetchEv> fetches_;
    std::vector<IncEv> incs_;
    std::vector<TrustEv> trusteds_;
    std::vector<ConsistEv> consists_;
    std::vector<MarkEv> marks_;
};

namespace detail {

/// Shared verdict accumulation: a violation wins outright and freezes
/// the report; inconclusive observations stick unless a violation
/// lands later.
struct Outcome {
    PropertyReport rep;
    explicit Outcome(std::string name) { rep.name = std::move(name); }
    bool decided() const { return rep.verdict == Verdict::Violated; }
    void violated(std::vector<std::size_t> witness, std::string note) {
        if (decided()) return;
        rep.verdict = Verdict::Violated;
        rep.witness = std::move(witness);
        rep.note = std::move(note);
    }
    void inconclusive(std::vector<std::size_t> witness, std::string note) {
        if (rep.verdict != Verdict::Holds) return;
        rep.verdict = Verdict::Inconclusive;
        rep.witness = std::move(witness);
        rep.note = std::move(note);
    }
};

}  // namespace detail

/// Broadcast agreement properties, evaluated over the stabilized
/// suffix (after the cut marker when the run had a corruption, the
/// whole run otherwise).
///
/// Two checks deliberately run on separate evidence: the per-slot
/// delivery bookkeeping (integrity) and the recorded support counts
/// (support), so weakening a quorum cannot hide behind value
/// agreement.
///
/// Two deliveries of the same round number may still belong to
/// different repetitions once rounds wrap modulo the round space.
/// Where the trace carries epoch stamps (repetition counts recorded at
/// the producer) they identify the repetition exactly and the checks
/// key on them. Unstamped events, which cover runs without round
/// recycling, faulty broadcasters, and rounds fabricated by state
/// corruption, fall back to aligning same-round deliveries across
/// receivers by occurrence order; that alignment is sound whenever
/// completion holds, and when completion fails its own report flags
/// the run.
inline std::vector<PropertyReport> check_brb(const TraceView& tv) {
    using Key = std::tuple<int, int, int, Value>;   // inst, slot, round, value
    using EKey = std::tuple<int, int, long>;        // inst, slot, epoch
    const long quorum = 2L * tv.t() + 1;

    detail::Outcome validity("brb-validity");
    detail::Outcome support("brb-support");
    detail::Outcome integrity("brb-integrity");
    detail::Outcome noduplicity("brb-no-duplicity");
    detail::Outcome completion1("brb-completion-1");
    detail::Outcome completion2("brb-completion-2");

    std::map<Key, std::vector<std::size_t>> bcast_at;
    for (const auto& b : tv.broadcasts())
        if (b.epoch < 0) bcast_at[{b.inst, b.slot, tv.norm_round(b.round), b.value}].push_back(b.idx);
    std::map<std::pair<int, Key>, std::vector<std::size_t>> delivered_at;
    std::map<std::pair<int, EKey>, std::pair<std::size_t, Value>> delivered_epoch;
    std::map<std::tuple<int, int, int>, std::vector<const TraceView::Delivery*>> per_slot;
    std::map<std::tuple<int, int, int>, std::map<int, std::vector<const TraceView::Delivery*>>>
        per_round;
    std::map<EKey, std::vector<const TraceView::Delivery*>> per_epoch;

    for (const auto& d : tv.deliveries()) {
        if (!tv.in_suffix(d.idx)) continue;
        const int r = tv.norm_round(d.round);
        per_slot[{d.node, d.inst, d.slot}].push_back(&d);
        if (d.epoch >= 0) {
            const EKey ek{d.inst, d.slot, d.epoch};
            per_epoch[ek].push_back(&d);
            auto [it, fresh] = delivered_epoch.try_emplace({d.node, ek}, d.idx, d.value);
            if (!fresh)
                integrity.violated({it->second.first, d.idx},
                                   "one repetition of a round delivered twice");
        } else {
            delivered_at[{d.node, {d.inst, d.slot, r, d.value}}].push_back(d.idx);
            per_round[{d.inst, d.slot, r}][d.node].push_back(&d);
        }

        if (tv.correct(d.slot) && d.epoch < 0) {
            const auto it = bcast_at.find({d.inst, d.slot, r, d.value});
            const bool matched =
                it != bcast_at.end() && !it->second.empty() && it->second.front() < d.idx;
            if (!matched)
                validity.violated({d.idx}, "delivered value was never broadcast by node " +
                                               std::to_string(d.slot));
        }
        if (d.support < quorum)
            support.violated({d.idx}, "support " + std::to_string(d.support) + " below " +
                                          std::to_string(quorum));
    }

    std::map<EKey, const TraceView::Broadcast*> bcast_epoch;
    for (const auto& b : tv.broadcasts()) {
        if (b.epoch < 0) continue;
        bcast_epoch[{b.inst, b.slot, b.epoch}] = &b;
    }
    for (const auto& [ek, evs] : per_epoch) {
        const auto bit = bcast_epoch.find(ek);
        for (const auto* d : evs) {
            if (bit == bcast_epoch.end() || bit->second->value != d->value ||
                bit->second->idx >= d->idx)
                validity.violated({d->idx}, "delivered value was never broadcast by node " +
                                                std::to_string(d->slot));
        }
        for (std::size_t i = 1; i < evs.size(); ++i)
            if (evs[i]->value != evs[0]->value)
                noduplicity.violated({evs[0]->idx, evs[i]->idx},
                                     "two receivers delivered different values");
    }

    for (const auto& [key, evs] : per_slot) {
        if (tv.single_mode()) {
            if (evs.size() > 1)
                integrity.violated({evs[0]->idx, evs[1]->idx}, "second delivery for one slot");
            continue;
        }
        for (std::size_t i = 1; i < evs.size(); ++i)
            if (evs[i]->round == evs[i - 1]->round)
                integrity.violated({evs[i - 1]->idx, evs[i]->idx},
                                   "same round delivered twice without a round change");
    }

    for (const auto& [key, by_node] : per_round) {
        std::size_t max_occ = 0;
        for (const auto& [node, evs] : by_node) max_occ = std::max(max_occ, evs.size());
        for (std::size_t occ = 0; occ < max_occ; ++occ) {
            const TraceView::Delivery* first = nullptr;
            for (const auto& [node, evs] : by_node) {
                if (occ >= evs.size()) continue;
                if (!first) {
                    first = evs[occ];
                } else if (first->value != evs[occ]->value) {
                    noduplicity.violated({first->idx, evs[occ]->idx},
                                         "two receivers delivered different values");
                }
            }
        }
    }

    const std::vector<int> receivers = tv.correct_nodes();
    bool any_bcast = false;
    for (const auto& b : tv.broadcasts()) {
        if (!tv.in_suffix(b.idx) || !tv.correct(b.node)) continue;
        any_bcast = true;
        for (int j : receivers) {
            bool got = false;
            if (b.epoch >= 0) {
                const auto it = delivered_epoch.find({j, {b.inst, b.slot, b.epoch}});
                got = it != delivered_epoch.end() && it->second.second == b.value &&
                      it->second.first > b.idx;
            } else {
                const auto it =
                    delivered_at.find({j, {b.inst, b.slot, tv.norm_round(b.round), b.value}});
                got = it != delivered_at.end() && it->second.back() > b.idx;
            }
            if (got) continue;
            if (b.step + tv.grace() <= tv.end_step())
                completion1.violated({b.idx}, "node " + std::to_string(j) +
                                                  " never delivered a correct broadcast");
            else
                completion1.inconclusive({b.idx}, "broadcast too close to the end of the run");
        }
    }
    if (!any_bcast) completion1.inconclusive({}, "no broadcasts in scope");

    for (const auto& [key, by_node] : per_round) {
        const auto& [inst, slot, round] = key;
        std::size_t max_occ = 0;
        for (const auto& [node, evs] : by_node) max_occ = std::max(max_occ, evs.size());
        std::size_t min_occ = max_occ;
        int lagger = -1;
        for (int j : receivers) {
            const auto it = by_node.find(j);
            const std::size_t cnt = it == by_node.end() ? 0 : it->second.size();
            if (cnt < min_occ) {
                min_occ = cnt;
                lagger = j;
            }
        }
        if (min_occ == max_occ) continue;
        const TraceView::Delivery* probe = nullptr;
        for (const auto& [node, evs] : by_node)
            if (evs.size() > min_occ) {
                probe = evs[min_occ];
                break;
            }
        const std::string who = "node " + std::to_string(lagger) + " missed a delivery for slot " +
                                std::to_string(slot);
        if (!tv.correct(slot) && !tv.single_mode())
            completion2.inconclusive({probe->idx}, who + " (faulty broadcaster, recycled slot)");
        else if (probe->step + tv.grace() <= tv.end_step())
            completion2.violated({probe->idx}, who);
        else
            completion2.inconclusive({probe->idx}, who + " (too close to the end of the run)");
    }

    return {validity.rep,    support.rep,     integrity.rep,
            noduplicity.rep, completion1.rep, completion2.rep};
}

/// Recycling counter properties over the stabilized suffix. Receiver
/// side quantifies over correct nodes; broadcaster side over correct
/// broadcasters.
inline std::vector<PropertyReport> check_irc(const TraceView& tv) {
    const int B = tv.modulus();

    detail::Outcome validity("irc-validity");
    detail::Outcome integrity1("irc-integrity-1");
    detail::Outcome integrity2("irc-integrity-2");
    detail::Outcome preemption("irc-preemption");
    detail::Outcome completion("irc-completion");

    std::map<std::tuple<int, int, int>, std::vector<std::size_t>> inc_at;  // node, inst, round
    std::map<std::pair<int, int>, std::vector<const TraceView::IncEv*>> incs_of;
    for (const auto& i : tv.incs()) {
        inc_at[{i.node, i.inst, i.round}].push_back(i.idx);
        incs_of[{i.node, i.inst}].push_back(&i);
    }

    std::map<std::tuple<int, int, int>, std::vector<const TraceView::FetchEv*>> fetch_seq;
    std::map<std::tuple<int, int, int, int>, std::vector<std::size_t>> fetch_at;
    for (const auto& f : tv.fetches()) {
        if (!tv.in_suffix(f.idx)) continue;
        fetch_seq[{f.node, f.inst, f.from}].push_back(&f);
        fetch_at[{f.node, f.inst, f.from, f.round}].push_back(f.idx);

        if (tv.correct(f.from)) {
            const auto it = inc_at.find({f.from, f.inst, f.round});
            const bool matched =
                it != inc_at.end() && !it->second.empty() && it->second.front() < f.idx;
            if (!matched)
                validity.violated({f.idx}, "fetched a round never produced by node " +
                                               std::to_string(f.from));
        }
    }

    for (const auto& [key, seq] : fetch_seq) {
        if (!tv.correct(std::get<2>(key))) continue;
        for (std::size_t i = 1; i < seq.size(); ++i)
            if (B > 0 && seq[i]->round != (seq[i - 1]->round + 1) % B)
                integrity1.violated({seq[i - 1]->idx, seq[i]->idx},
                                    "fetch skipped or repeated a round");
        const auto inc_it = incs_of.find({std::get<2>(key), std::get<1>(key)});
        std::size_t p = 0;
        for (const auto* f : seq) {
            bool ok = false;
            if (inc_it != incs_of.end())
                while (p < inc_it->second.size()) {
                    if (inc_it->second[p++]->round == f->round) {
                        ok = true;
                        break;
                    }
                }
            if (!ok) {
                integrity2.violated({f->idx}, "fetch order left the producer's round order");
                break;
            }
        }
    }

    const std::vector<int> receivers = tv.correct_nodes();
    for (const auto& [key, seq] : incs_of) {
        if (!tv.correct(key.first)) continue;
        for (std::size_t i = 1; i < seq.size(); ++i) {
            const auto* prev = seq[i - 1];
            const auto* next = seq[i];
            if (!tv.in_suffix(prev->idx)) continue;
            for (int j : receivers) {
                const auto it = fetch_at.find({j, key.second, key.first, prev->round});
                bool got = false;
                if (it != fetch_at.end())
                    for (std::size_t idx : it->second)
                        if (idx > prev->idx && idx < next->idx) {
                            got = true;
                            break;
                        }
                if (!got)
                    preemption.violated({prev->idx, next->idx},
                                        "round advanced before node " + std::to_string(j) +
                                            " consumed the previous one");
            }
        }
    }

    if (tv.rounds_target() <= 0) {
        completion.inconclusive({}, "no rounds target configured");
    } else {
        // The target counts the whole workload, so rounds opened while
        // the run was still converging count too.
        for (int k : receivers) {
            long cnt = 0;
            std::size_t last_idx = 0;
            long last_step = 0;
            for (const auto& i : tv.incs())
                if (i.node == k) {
                    ++cnt;
                    last_idx = i.idx;
                    last_step = i.step;
                }
            if (cnt >= tv.rounds_target()) continue;
            std::vector<std::size_t> w;
            if (cnt > 0) w.push_back(last_idx);
            if (tv.end_step() - last_step > tv.grace())
                completion.violated(w, "node " + std::to_string(k) + " stalled at " +
                                           std::to_string(cnt) + " rounds");
            else
                completion.inconclusive(w, "node " + std::to_string(k) +
                                               " still progressing at the horizon");
        }
    }

    return {validity.rep, integrity1.rep, integrity2.rep, preemption.rep, completion.rep};
}

/// Muteness detector properties. Completeness is judged at round
/// boundaries of each observer: an interval that started after the
/// peer fell silent must end with that peer out of the trusted set,
/// and a suspicion must not be retracted before the boundary resets
/// the counters. Accuracy forbids ever dropping a correct peer in the
/// stabilized suffix.
inline std::vector<PropertyReport> check_muteness(const TraceView& tv) {
    detail::Outcome completeness("mute-completeness");
    detail::Outcome accuracy("mute-accuracy");

    std::vector<int> mutes;
    for (const auto& [id, strat] : tv.adversaries())
        if (strat == "mute-after" || strat == "crash-at") mutes.push_back(id);

    std::map<std::pair<int, int>, std::vector<const TraceView::TrustEv*>> timeline;
    for (const auto& tev : tv.trusteds()) timeline[{tev.node, tev.inst}].push_back(&tev);

    const auto mask_before = [&](int node, int inst, std::size_t idx) {
        std::uint64_t mask = (~0ull >> (64 - tv.n())) & ~(1ull << node);
        const auto it = timeline.find({node, inst});
        if (it != timeline.end())
            for (const auto* tev : it->second) {
                if (tev->idx >= idx) break;
                mask = tev->mask;
            }
        return mask;
    };

    if (mutes.empty() || tv.adversary_step() < 0) {
        completeness.inconclusive({}, "no silent adversary in this run");
    } else {
        std::map<std::pair<int, int>, std::vector<const TraceView::IncEv*>> incs_of;
        for (const auto& i : tv.incs())
            if (tv.correct(i.node)) incs_of[{i.node, i.inst}].push_back(&i);
        bool any_interval = false;
        for (const auto& [key, seq] : incs_of) {
            for (std::size_t i = 1; i < seq.size(); ++i) {
                const auto* open = seq[i - 1];
                const auto* close = seq[i];
                if (open->step < tv.adversary_step()) continue;
                any_interval = true;
                for (int m : mutes) {
                    if ((mask_before(key.first, key.second, close->idx) >> m) & 1)
                        completeness.violated({open->idx, close->idx},
                                              "observer " + std::to_string(key.first) +
                                                  " opened a round still trusting silent node " +
                                                  std::to_string(m));
                    const auto it = timeline.find(key);
                    if (it == timeline.end()) continue;
                    const TraceView::TrustEv* dropped = nullptr;
                    for (const auto* tev : it->second) {
                        if (tev->idx <= open->idx || tev->idx >= close->idx) continue;
                        const bool trusts = ((tev->mask >> m) & 1) != 0;
                        if (!trusts) {
                            if (!dropped) dropped = tev;
                        } else if (dropped) {
                            completeness.violated({open->idx, dropped->idx, tev->idx, close->idx},
                                                  "suspicion of node " + std::to_string(m) +
                                                      " retracted before the round boundary");
                        }
                    }
                }
            }
        }
        if (!any_interval)
            completeness.inconclusive({}, "no full round interval after the silence began");
    }

    for (const auto& tev : tv.trusteds()) {
        if (!tv.in_suffix(tev.idx) || !tv.correct(tev.node)) continue;
        for (int j = 0; j < tv.n(); ++j) {
            if (j == tev.node || !tv.correct(j)) continue;
            if (((tev.mask >> j) & 1) == 0)
                accuracy.violated({tev.idx},
                                  "correct node " + std::to_string(j) + " fell out of trust");
        }
    }

    return {completeness.rep, accuracy.rep};
}

/// Consistency of sampled node states. Without a corruption marker the
/// samples must all pass. With one, the run must reach a sampling
/// point from which every later sample passes, within the settle
/// budget counted in sampling rounds from the corruption.
inline std::vector<PropertyReport> check_consistency(const TraceView& tv) {
    detail::Outcome rep(tv.corrupt_idx() < 0 ? "consistency-steady" : "consistency-converge");

    if (tv.corrupt_idx() < 0) {
        for (const auto& c : tv.consists())
            if (!c.ok) {
                std::size_t mark_idx = c.idx;
                for (const auto& m : tv.marks())
                    if (m.round == c.round) mark_idx = m.idx;
                rep.violated({mark_idx, c.idx},
                             "node " + std::to_string(c.node) + " sampled inconsistent");
            }
        return {rep.rep};
    }

    std::map<long, std::pair<bool, const TraceView::ConsistEv*>> by_round;
    for (const auto& c : tv.consists()) {
        if (c.step <= tv.corrupt_step()) continue;
        auto [it, fresh] = by_round.try_emplace(c.round, true, &c);
        if (!c.ok) {
            it->second.first = false;
            it->second.second = &c;
        }
    }
    if (by_round.empty()) {
        rep.inconclusive({}, "no samples after the corruption");
        return {rep.rep};
    }

    long stable_from = -1;
    for (const auto& [round, ok] : by_round) {
        if (ok.first) {
            if (stable_from < 0) stable_from = round;
        } else {
            stable_from = -1;
        }
    }
    const long base = by_round.begin()->first;
    if (stable_from < 0) {
        const auto& last_bad = *std::prev(by_round.end());
        std::size_t mark_idx = last_bad.second.second->idx;
        for (const auto& m : tv.marks())
            if (m.round == last_bad.first) mark_idx = m.idx;
        rep.violated({mark_idx, last_bad.second.second->idx},
                     "still inconsistent at the last sample");
        return {rep.rep};
    }
    const long rounds = stable_from - base;
    if (rounds > tv.budget()) {
        const auto bad = by_round.find(stable_from - 1);
        std::size_t w = bad != by_round.end() ? bad->second.second->idx : tv.suffix_begin();
        rep.violated({w}, "took " + std::to_string(rounds) + " sampling rounds, budget " +
                              std::to_string(tv.budget()));
    } else {
        rep.rep.note = "rounds=" + std::to_string(rounds);
    }
    return {rep.rep};
}

/// Sending-order preservation: what each receiver delivered from one
/// broadcaster, across all instances, must be a prefix of what that
/// broadcaster sent, in order.
inline std::vector<PropertyReport> check_fifo(const TraceView& tv) {
    detail::Outcome order("fifo-order");

    std::map<int, std::vector<const TraceView::Broadcast*>> sent;
    for (const auto& b : tv.broadcasts())
        if (tv.correct(b.node)) sent[b.node].push_back(&b);

    std::map<std::pair<int, int>, std::vector<const TraceView::Delivery*>> got;
    for (const auto& d : tv.deliveries())
        if (tv.correct(d.slot)) got[{d.node, d.slot}].push_back(&d);

    for (const auto& [key, seq] : got) {
        const auto& src = sent[key.second];
        for (std::size_t i = 0; i < seq.size(); ++i) {
            if (i >= src.size() || src[i]->value != seq[i]->value) {
                std::vector<std::size_t> w = {seq[i]->idx};
                if (i < src.size()) w.insert(w.begin(), src[i]->idx);
                order.violated(w, "delivery order at node " + std::to_string(key.first) +
                                      " left the send order of node " +
                                      std::to_string(key.second));
                break;
            }
        }
    }

    return {order.rep};
}

/// Delivery-equivalence between two runs of the same workload and
/// seed: every correct node must deliver the same multiset of
/// (instance, slot, round, value). Mismatched run identities are a
/// usage error, not a verdict.
inline PropertyReport differential(const TraceView& a, const TraceView& b) {
    if (a.seed() != b.seed()) throw std::runtime_error("differential: seed mismatch");
    if (a.n() != b.n() || a.t() != b.t()) throw std::runtime_error("differential: size mismatch");
    if (a.correct_mask() != b.correct_mask())
        throw std::runtime_error("differential: correct sets differ");

    detail::Outcome rep("differential");
    const bool use_rounds = !a.single_mode() && !b.single_mode();

    using Key = std::tuple<int, int, int, int, Value>;  // node, inst, slot, round, value
    const auto collect = [&](const TraceView& tv) {
        std::map<Key, std::pair<long, std::size_t>> out;
        for (const auto& d : tv.deliveries()) {
            if (!tv.in_suffix(d.idx)) continue;
            auto [it, fresh] = out.try_emplace(
                Key{d.node, d.inst, d.slot, use_rounds ? d.round : kNoRound, d.value}, 0L, d.idx);
            ++it->second.first;
        }
        return out;
    };
    const auto left = collect(a);
    const auto right = collect(b);

    for (const auto& [key, cnt] : left) {
        const auto it = right.find(key);
        const long other = it == right.end() ? 0 : it->second.first;
        if (cnt.first != other) {
            rep.violated({cnt.second}, "node " + std::to_string(std::get<0>(key)) +
                                           " delivery counts differ for slot " +
                                           std::to_string(std::get<2>(key)));
            return rep.rep;
        }
    }
    for (const auto& [key, cnt] : right) {
        if (left.find(key) == left.end()) {
            rep.violated({cnt.second}, "node " + std::to_string(std::get<0>(key)) +
                                           " delivered a value absent from the other run");
            return rep.rep;
        }
    }
    return rep.rep;
}

/// Containment of an instance-scoped corruption: deliveries in every
/// other instance must be identical between the corrupted run and a
/// clean run of the same seed.
inline PropertyReport instance_isolation(const TraceView& corrupted, const TraceView& clean) {
    if (corrupted.seed() != clean.seed())
        throw std::runtime_error("isolation: seed mismatch");
    if (corrupted.corrupt_inst() < 0)
        throw std::runtime_error("isolation: corruption is not instance-scoped");

    detail::Outcome rep("instance-isolation");
    const int hit = corrupted.corrupt_inst();

    using Key = std::tuple<int, int, int, int, Value>;
    const auto collect = [&](const TraceView& tv) {
        std::map<Key, std::pair<long, std::size_t>> out;
        for (const auto& d : tv.deliveries()) {
            if (d.inst == hit) continue;
            auto [it, fresh] =
                out.try_emplace(Key{d.node, d.inst, d.slot, d.round, d.value}, 0L, d.idx);
            ++it->second.first;
        }
        return out;
    };
    const auto dirty = collect(corrupted);
    const auto base = collect(clean);

    for (const auto& [key, cnt] : dirty) {
        const auto it = base.find(key);
        if (it == base.end() || it->second.first != cnt.first) {
            rep.violated({cnt.second}, "instance " + std::to_string(std::get<1>(key)) +
                                           " deliveries changed at node " +
                                           std::to_string(std::get<0>(key)));
            return rep.rep;
        }
    }
    for (const auto& [key, cnt] : base) {
        if (dirty.find(key) == dirty.end()) {
            rep.violated({}, "instance " + std::to_string(std::get<1>(key)) +
                                 " lost a delivery at node " + std::to_string(std::get<0>(key)));
            return rep.rep;
        }
    }
    return rep.rep;
}

/// Report rendering: one line per property, then notes, then a
/// machine-readable summary. Witnesses print as the steps of their
/// events so a reader can jump into the trace file.
inline std::string render_reports(const TraceView& tv, const std::vector<PropertyReport>& reps) {
    std::string out;
    for (const auto& r : reps) {
        out += r.name;
        out += '|';
        out += verdict_name(r.verdict);
        out += '|';
        bool first = true;
        for (std::size_t idx : r.witness) {
            if (!first) out += ',';
            first = false;
            out += std::to_string(tv.trace().events[idx].step);
        }
        out += '\n';
    }
    for (const auto& r : reps)
        if (!r.note.empty()) out += "#info|" + r.name + "|" + r.note + "\n";
    long holds = 0, violated = 0, inconclusive = 0;
    for (const auto& r : reps) {
        if (r.verdict == Verdict::Holds) ++holds;
        if (r.verdict == Verdict::Violated) ++violated;
        if (r.verdict == Verdict::Inconclusive) ++inconclusive;
    }
    out += "#summary|checked=" + std::to_string(reps.size()) + "|holds=" + std::to_string(holds) +
           "|violated=" + std::to_string(violated) +
           "|inconclusive=" + std::to_string(inconclusive) + "\n";
    return out;
}

/// Carves the minimal replayable sub-trace for one report: run
/// identity markers, the witness events, and the end marker. Running
/// the same checker over the slice reproduces the verdict.
inline Trace witness_slice(const Trace& tr, const PropertyReport& rep) {
    std::set<std::size_t> keep(rep.witness.begin(), rep.witness.end());
    for (std::size_t i = 0; i < tr.events.size(); ++i) {
        const std::string& k = tr.events[i].kind;
        if (k == "config" || k == "seed" || k == "correct" || k == "corrupt" || k == "cut" ||
            k == "end")
            keep.insert(i);
    }
    Trace out;
    for (std::size_t i : keep) out.events.push_back(tr.events[i]);
    return out;
}

}  // namespace ssbrb
