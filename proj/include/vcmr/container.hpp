#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vcmr {

// Named dense matrix/tensor as stored in the binary container. Used both for
// parameter checkpoints and feature files.
struct NamedTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;

    int64_t rows() const { return shape.empty() ? 1 : shape[0]; }
    int64_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }
};

// Versioned binary container: header (magic, version, record count) followed
// by records of (name length, UTF-8 name, rank, extents, raw little-endian
// float64 values).
void write_container(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_container(const std::string& path);

// Convenience lookup; throws IoError naming the file and entry when missing.
const NamedTensor& find_tensor(const std::vector<NamedTensor>& ts, const std::string& name,
                               const std::string& path);

}  // namespace vcmr
