#include "vcmr/evaluation.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

namespace vcmr {

double temporal_iou(Span a, Span b) {
    if (!(a.t0 < a.t1) || !(b.t0 < b.t1)) throw InvalidArgument("temporal_iou: degenerate span");
    const double inter = std::min(a.t1, b.t1) - std::max(a.t0, b.t0);
    if (inter <= 0.0) return 0.0;
    const double uni = (a.t1 - a.t0) + (b.t1 - b.t0) - inter;
    return inter / uni;
}

namespace {

bool query_hit(const std::vector<ScoredMoment>& ranked, const QueryRecord& q, int k,
               double iou_threshold, Task task) {
    const Span gt{q.begin_s, q.end_s};
    switch (task) {
        case Task::vcmr: {
            const int depth = std::min<int>(k, static_cast<int>(ranked.size()));
            for (int r = 0; r < depth; ++r) {
                const ScoredMoment& m = ranked[static_cast<size_t>(r)];
                if (m.video_id != q.video_id) continue;
                if (temporal_iou({m.t0, m.t1}, gt) >= iou_threshold) return true;
            }
            return false;
        }
        case Task::svmr: {
            int rank = 0;
            for (const ScoredMoment& m : ranked) {
                if (m.video_id != q.video_id) continue;
                ++rank;
                if (rank > k) return false;
                if (temporal_iou({m.t0, m.t1}, gt) >= iou_threshold) return true;
            }
            return false;
        }
        case Task::vr: {
            std::unordered_set<std::string> seen;
            for (const ScoredMoment& m : ranked) {
                if (seen.insert(m.video_id).second) {
                    if (static_cast<int>(seen.size()) > k) return false;
                    if (m.video_id == q.video_id) return true;
                }
            }
            return false;
        }
    }
    return false;
}

const char* task_name(Task t) {
    switch (t) {
        case Task::vcmr: return "VCMR";
        case Task::svmr: return "SVMR";
        case Task::vr: return "VR";
    }
    return "?";
}

}  // namespace

double recall_at_k(const std::vector<std::vector<ScoredMoment>>& results,
                   const std::vector<QueryRecord>& queries, int k, double iou_threshold,
                   Task task) {
    if (results.size() != queries.size())
        throw InvalidArgument("recall_at_k: results/queries size mismatch");
    if (queries.empty()) return 0.0;
    int hits = 0;
    for (size_t i = 0; i < queries.size(); ++i)
        if (query_hit(results[i], queries[i], k, iou_threshold, task)) ++hits;
    return 100.0 * hits / static_cast<double>(queries.size());
}

double oracle_recall(const std::vector<RankList>& lists, const std::vector<QueryRecord>& queries,
                     int k) {
    if (queries.empty()) return 0.0;
    int hits = 0;
    for (const QueryRecord& q : queries) {
        for (const RankList& rl : lists) {
            if (rl.query_id != q.id) continue;
            const int r = rl.rank_of(q.video_id);
            if (r >= 1 && r <= k) ++hits;
            break;
        }
    }
    return 100.0 * hits / static_cast<double>(queries.size());
}

EvalReport evaluate(const std::vector<std::vector<ScoredMoment>>& results,
                    const std::vector<QueryRecord>& queries, const std::vector<RankList>& lists,
                    const EvalOptions& opts, int stage1_top_k) {
    opts.validate();
    EvalReport rep;
    rep.query_count = static_cast<int>(queries.size());
    rep.stage1_top_k = stage1_top_k;
    rep.oracle = oracle_recall(lists, queries, stage1_top_k);
    for (Task task : {Task::vcmr, Task::svmr}) {
        for (double iou : opts.ious)
            for (int k : opts.ks)
                rep.rows.push_back(
                    {task, k, iou, recall_at_k(results, queries, k, iou, task)});
    }
    for (int k : opts.ks)
        rep.rows.push_back({Task::vr, k, 0.0, recall_at_k(results, queries, k, 0.0, Task::vr)});
    return rep;
}

std::string EvalReport::to_table() const {
    std::string out;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "queries: %d   stage-1 top-k: %d   oracle recall: %.2f\n",
                  query_count, stage1_top_k, oracle);
    out += buf;
    std::snprintf(buf, sizeof(buf), "%-6s %-6s %-6s %8s\n", "task", "K", "IoU", "R@K");
    out += buf;
    for (const Row& r : rows) {
        if (r.task == Task::vr)
            std::snprintf(buf, sizeof(buf), "%-6s %-6d %-6s %8.2f\n", task_name(r.task), r.k, "-",
                          r.value);
        else
            std::snprintf(buf, sizeof(buf), "%-6s %-6d %-6.2f %8.2f\n", task_name(r.task), r.k,
                          r.iou, r.value);
        out += buf;
    }
    return out;
}

std::string EvalReport::to_kv() const {
    std::string out;
    char buf[128];
    for (const Row& r : rows) {
        if (r.task == Task::vr)
            std::snprintf(buf, sizeof(buf), "%s.%d=%.4f\n", task_name(r.task), r.k, r.value);
        else
            std::snprintf(buf, sizeof(buf), "%s.%d.%.1f=%.4f\n", task_name(r.task), r.k, r.iou,
                          r.value);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "oracle.%d=%.4f\n", stage1_top_k, oracle);
    out += buf;
    return out;
}

}  // namespace vcmr
