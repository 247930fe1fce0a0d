#pragma once

#include "vcmr/retrieval.hpp"

namespace vcmr {

enum class Task { vcmr, svmr, vr };

// IoU of two timestamp intervals; 0 when disjoint. Throws on degenerate
// spans (t0 >= t1).
double temporal_iou(Span a, Span b);

// Percentage of queries with a qualifying hit at rank <= k. VCMR requires a
// moment of the gt video with IoU >= threshold (inclusive); SVMR ranks only
// the gt video's moments; VR counts gt-video membership among the top-k
// distinct videos and ignores the threshold.
double recall_at_k(const std::vector<std::vector<ScoredMoment>>& results,
                   const std::vector<QueryRecord>& queries, int k, double iou_threshold,
                   Task task);

// Fraction of queries whose gt video appears within the top-k of its
// first-stage list, x100.
double oracle_recall(const std::vector<RankList>& lists, const std::vector<QueryRecord>& queries,
                     int k);

struct EvalOptions {
    std::vector<int> ks{1, 5, 10, 100};
    std::vector<double> ious{0.5, 0.7};

    void validate() const {
        for (double t : ious)
            if (t <= 0.0 || t > 1.0) throw ConfigError("iou thresholds must be in (0,1]");
    }
};

struct EvalReport {
    struct Row {
        Task task;
        int k = 0;
        double iou = 0.0;  // unused for VR
        double value = 0.0;
    };
    std::vector<Row> rows;
    int query_count = 0;
    int stage1_top_k = 0;
    double oracle = 0.0;

    std::string to_table() const;
    std::string to_kv() const;  // machine-readable task.K.iou=value lines
};

EvalReport evaluate(const std::vector<std::vector<ScoredMoment>>& results,
                    const std::vector<QueryRecord>& queries, const std::vector<RankList>& lists,
                    const EvalOptions& opts, int stage1_top_k);

}  // namespace vcmr
