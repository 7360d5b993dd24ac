#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "ndm/bundle.hpp"
#include "ndm/sampler.hpp"

namespace ndm {

// Single-file container: magic "NDM1", format version, JSON header, then a
// payload of named little-endian arrays. Weights are stored as float32;
// schedule coefficients and traces as float64 ("f4"/"f8" dtype tags).
struct NamedArray {
    std::string name;
    std::string dtype = "f4";  // "f4" or "f8"
    std::vector<int64_t> shape;
    std::vector<double> data;  // always float64 in memory

    int64_t count() const;
};

struct Checkpoint {
    nlohmann::json header;  // everything except the raw arrays
    std::vector<NamedArray> arrays;

    const NamedArray& array(const std::string& name) const;
    bool has(const std::string& name) const;

    NamedArray& add(const std::string& name, const std::string& dtype,
                    std::vector<int64_t> shape);
    void add_matrix(const std::string& name, const Eigen::MatrixXd& m,
                    const std::string& dtype = "f4");
    void add_vector(const std::string& name, const Eigen::VectorXd& v,
                    const std::string& dtype = "f4");
    Eigen::MatrixXd matrix(const std::string& name) const;
    Eigen::VectorXd vector(const std::string& name) const;
};

// Atomic write (temp file + rename).
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint bundle_to_checkpoint(const ModelBundle& bundle);
ModelBundle bundle_from_checkpoint(const Checkpoint& ck);

Checkpoint trace_to_checkpoint(const SampleTrace& trace);
SampleTrace trace_from_checkpoint(const Checkpoint& ck);

Checkpoint encoder_to_checkpoint(const EncoderModel& enc);
EncoderModel encoder_from_checkpoint(const Checkpoint& ck);

}  // namespace ndm
