#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace vcmr {

// Plain row-major feature matrix (outside the autodiff graph).
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

// Time interval in seconds.
struct Span {
    double t0 = 0.0;
    double t1 = 0.0;
};

// First-stage output for one query: video ids with non-increasing r1 scores.
struct RankList {
    std::string query_id;
    std::vector<std::pair<std::string, double>> entries;

    // 1-based rank of a video, 0 when absent.
    int rank_of(const std::string& video_id) const {
        for (size_t i = 0; i < entries.size(); ++i)
            if (entries[i].first == video_id) return static_cast<int>(i) + 1;
        return 0;
    }
};

}  // namespace vcmr
