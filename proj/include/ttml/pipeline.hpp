#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ttml/contrastive.hpp"
#include "ttml/dataset.hpp"
#include "ttml/layers.hpp"
#include "ttml/tensor.hpp"

namespace ttml {

// ---------------------------------------------------------------------------
// Schedules and optimizer
// ---------------------------------------------------------------------------

struct TrainConfig {
    double lr0 = 0.02;
    int64_t decay_steps = 80000;
    double decay_rate = 0.96;
    int freeze_epochs = 50;
    int pretrain_epochs = 100;
    int finetune_epochs = 50;
    int batch = 32;
    double tau = 0.5;
    uint64_t seed = 1;
    AugmentConfig aug;
    bool single_layer_classifier = false;

    void validate() const;
};

// Continuous exponential decay: lr0 * decay_rate^(step / decay_steps).
double lr_at(const TrainConfig& cfg, int64_t step);

struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    struct Slot {
        std::vector<float> m, v;
        int64_t step = 0;
    };
    std::vector<Slot> slots;  // aligned with the parameter list
};

// Bias-corrected update on every parameter whose mask entry is true, reading
// gradients from the tensors' grad buffers. Slots are created on first use
// and advance only when their parameter updates.
void adam_step(AdamState& state, const std::vector<Tensor>& params,
               const std::vector<bool>& mask, double lr);
void adam_step(AdamState& state, const std::vector<Tensor>& params, double lr);

// ---------------------------------------------------------------------------
// Model: encoder + projection head (optionally TT first layer) + optional
// classifier after snipping.
// ---------------------------------------------------------------------------

enum class Proj1Kind { Dense, TT };

struct ModelSpec {
    EncoderConfig encoder;
    int image_size = 256;
    int in_channels = 3;
    bool tensorized = false;
    TTDenseSpec tt;  // first head layer factorization, when tensorized
    std::vector<int64_t> head = {4096, 1024, 512};
    int num_classes = 11;
    bool single_layer_classifier = false;
};

struct Model {
    ModelSpec spec;
    Encoder encoder;
    Proj1Kind proj1_kind = Proj1Kind::Dense;
    std::optional<DenseLayer> proj1_dense;
    std::optional<TTDenseLayer> proj1_tt;
    std::optional<DenseLayer> proj2, proj3;
    std::vector<DenseLayer> classifier;
    bool snipped = false;

    int64_t feat_dim() const;
    // Stable enumeration used for optimizer slots and checkpoints.
    std::vector<Tensor> parameters() const;
    std::vector<bool> trainable_mask() const;
    int64_t param_count() const;
    void set_encoder_trainable(bool on);
    void zero_grads() const;
};

Model build_model(const ModelSpec& spec, uint64_t seed);

// Latent embedding through the full projection head (pre-snip).
Tensor model_embed(Graph& g, const Model& m, const Tensor& images);

// Class logits through the snipped head + classifier (post-snip).
Tensor model_logits(Graph& g, const Model& m, const Tensor& images);

// Removes the last two projection layers and attaches a classifier head
// ending in num_classes outputs; every surviving parameter buffer is reused
// untouched. Errors if already snipped.
void snip_and_attach(Model& m, bool single_layer_classifier, uint64_t seed);

// ---------------------------------------------------------------------------
// Training phases
// ---------------------------------------------------------------------------

struct EpochStat {
    double loss = 0.0;
    double wall_s = 0.0;
    double val_top1 = -1.0;  // finetune only
};

struct PretrainResult {
    std::vector<EpochStat> epochs;
    int64_t steps = 0;
};

// Contrastive phase: two augmented views per image, NT-Xent, Adam on the
// trainable parameters. The encoder mask is off for epochs < freeze_epochs.
PretrainResult pretrain(Model& m, const Dataset& data, const TrainConfig& cfg);

struct FinetuneResult {
    std::vector<EpochStat> epochs;
    double final_train_top1 = 0.0;
};

// Supervised phase on the snipped model: softmax cross entropy over the
// class logits; all parameters update.
FinetuneResult finetune(Model& m, const Dataset& train, const Dataset& val,
                        const TrainConfig& cfg);

// Fraction of samples whose argmax logit matches the label; ties resolve to
// the lowest class index.
double evaluate_top1(const Model& m, const Dataset& data);

// Mean softmax cross entropy; labels must lie in [0, num_classes).
Tensor cross_entropy(Graph& g, const Tensor& logits, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Model checkpoints (see checkpoint.hpp for the byte layout)
// ---------------------------------------------------------------------------

void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace ttml
