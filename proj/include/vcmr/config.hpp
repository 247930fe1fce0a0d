#pragma once

#include <string>

#include "vcmr/data.hpp"
#include "vcmr/model_config.hpp"
#include "vcmr/training.hpp"

namespace vcmr {

// Flat key=value run configuration. Unknown keys are rejected with the
// offending key named; CLI overrides take precedence over the file.
struct RunConfig {
    std::uint64_t seed = 42;
    Precision precision = Precision::f32;
    double clip_len = 1.5;
    std::string stage1 = "file";  // file | simplified

    ModelConfig model;
    TrainOptions train;
    RetrievalOptions retrieval;
    SyntheticSpec synth;

    static RunConfig from_file(const std::string& path);
    void apply_override(const std::string& key_equals_value);
    void apply(const std::string& key, const std::string& value);
    void finalize();  // propagate shared fields, then validate

    std::string resolved_text() const;  // one key=value per line, sorted
};

}  // namespace vcmr
