#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "lowml/corpus.hpp"
#include "lowml/models.hpp"

namespace lowml {

inline constexpr std::uint32_t kBundleSchemaVersion = 1;

struct Explanation {
    struct Contribution {
        std::string feature;
        double value = 0.0;  // contribution to the winning-class logit
    };
    std::vector<Contribution> contributions;  // sorted by |value| descending
    double bias = 0.0;
    std::string predicted_label;
    double winning_logit = 0.0;
};

// Label(s) or value(s) for one input.
struct Prediction {
    std::vector<std::string> labels;  // 1 for multiclass; 0..K for multilabel
    std::vector<double> values;       // regression outputs
    std::vector<double> proba;        // per-class scores (classification)
};

// Deployable bundle: 32-bit weights + frozen preprocessor. Immutable after
// construction; predict/explain are pure.
class Predictor {
public:
    Predictor(const Model& model, Preprocessor preproc);

    Prediction predict(const std::string& raw) const;
    std::vector<Prediction> predict(const std::vector<std::string>& raw) const;
    std::vector<double> predict_proba(const std::string& raw) const;

    Explanation explain(const std::string& raw) const;

    void save(const std::string& dir) const;

    const ModelSpec& spec() const { return spec_; }
    const Preprocessor& preproc() const { return preproc_; }
    const std::vector<std::string>& labels() const { return labels_; }
    // 32-bit weight payloads, in serialization order.
    const std::vector<std::pair<std::string, std::vector<float>>>& tensors() const {
        return tensors_;
    }
    const std::vector<std::vector<std::size_t>>& tensor_shapes() const { return shapes_; }

    // Raw feature vector as fed to the linear layer (after any NBSVM
    // binarize/scale), using the 32-bit weights.
    SparseVector model_input(const std::string& raw) const;
    Tensor logits(const SparseVector& input) const;

private:
    friend Predictor load_predictor(const std::string& dir);
    Predictor() = default;

    ModelSpec spec_;
    Preprocessor preproc_;
    std::vector<std::string> labels_;
    std::vector<std::pair<std::string, std::vector<float>>> tensors_;
    std::vector<std::vector<std::size_t>> shapes_;
    std::vector<float> nbsvm_r_;  // NBSVM ratio vector (32-bit copy)
};

Predictor get_predictor(const Model& model, const Preprocessor& preproc);

// Bundle layout: meta.json, vocab.txt, weights.bin (magic "LTPW"), checksum
// (SHA-256 per file). Round trips are byte-exact. Throws
// BundleMissingFileError / BundleChecksumError / BundleVersionError.
Predictor load_predictor(const std::string& dir);

}  // namespace lowml
