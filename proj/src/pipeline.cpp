#include "ttml/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "ttml/checkpoint.hpp"
#include "ttml/rng.hpp"

namespace ttml {

// ---------------------------------------------------------------------------
// Schedule and optimizer
// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (!(lr0 > 0)) throw UsageError("config: lr0 must be positive");
    if (decay_steps <= 0) throw UsageError("config: decay_steps must be positive");
    if (!(decay_rate > 0)) throw UsageError("config: decay_rate must be positive");
    if (freeze_epochs < 0 || pretrain_epochs < 0 || finetune_epochs < 0 || batch < 1)
        throw UsageError("config: epoch counts must be >= 0 and batch >= 1");
    if (freeze_epochs > pretrain_epochs)
        throw UsageError("config: freeze_epochs must not exceed pretrain_epochs");
    if (!(tau > 0)) throw UsageError("config: tau must be positive");
}

double lr_at(const TrainConfig& cfg, int64_t step) {
    if (step < 0) throw UsageError("lr_at: step must be >= 0");
    return cfg.lr0 * std::pow(cfg.decay_rate, double(step) / double(cfg.decay_steps));
}

void adam_step(AdamState& state, const std::vector<Tensor>& params,
               const std::vector<bool>& mask, double lr) {
    if (mask.size() != params.size())
        throw ShapeError("adam_step: mask size does not match parameter count");
    if (state.slots.empty()) state.slots.resize(params.size());
    if (state.slots.size() != params.size())
        throw ShapeError("adam_step: optimizer state holds a different parameter count");

    for (size_t p = 0; p < params.size(); ++p) {
        if (!mask[p]) continue;
        const Tensor& t = params[p];
        if (!t.grad) throw UsageError("adam_step: parameter without gradient buffer");
        auto& slot = state.slots[p];
        if (slot.m.empty()) {
            slot.m.assign(size_t(t.size()), 0.0f);
            slot.v.assign(size_t(t.size()), 0.0f);
        }
        if (int64_t(slot.m.size()) != t.size())
            throw ShapeError("adam_step: slot shape does not match parameter");
        ++slot.step;
        const double bc1 = 1.0 - std::pow(state.beta1, double(slot.step));
        const double bc2 = 1.0 - std::pow(state.beta2, double(slot.step));
        float* w = t.data->data();
        const float* grads = t.grad->data();
        for (size_t i = 0; i < slot.m.size(); ++i) {
            const double gi = grads[i];
            const double m = state.beta1 * slot.m[i] + (1.0 - state.beta1) * gi;
            const double v = state.beta2 * slot.v[i] + (1.0 - state.beta2) * gi * gi;
            slot.m[i] = float(m);
            slot.v[i] = float(v);
            w[i] = float(w[i] - lr * (m / bc1) / (std::sqrt(v / bc2) + state.eps));
        }
    }
}

void adam_step(AdamState& state, const std::vector<Tensor>& params, double lr) {
    adam_step(state, params, std::vector<bool>(params.size(), true), lr);
}

// ---------------------------------------------------------------------------
// Model assembly
// ---------------------------------------------------------------------------

int64_t Model::feat_dim() const { return encoder_out_channels(spec.encoder, spec.in_channels); }

Model build_model(const ModelSpec& spec, uint64_t seed) {
    if (spec.head.size() != 3) throw UsageError("model: projection head must have 3 layers");
    Model m;
    m.spec = spec;
    m.encoder = encoder_init(spec.encoder, spec.in_channels, Rng::stream(seed, 1).next());
    const int64_t feat = m.feat_dim();
    if (spec.tensorized) {
        TTDenseSpec tt = spec.tt;
        tt.validate();
        if (tt.in_dim() != feat)
            throw ShapeError("model: tt input split " + std::to_string(tt.in_a) + "x" +
                             std::to_string(tt.in_b) + " does not factor the " +
                             std::to_string(feat) + "-dim encoder output");
        if (tt.out_dim() != spec.head[0])
            throw ShapeError("model: tt output split does not factor " +
                             std::to_string(spec.head[0]));
        m.proj1_kind = Proj1Kind::TT;
        m.proj1_tt = tt_init(tt, Rng::stream(seed, 2).next());
    } else {
        m.proj1_kind = Proj1Kind::Dense;
        m.proj1_dense = dense_init(feat, spec.head[0], Rng::stream(seed, 2).next());
    }
    m.proj2 = dense_init(spec.head[0], spec.head[1], Rng::stream(seed, 3).next());
    m.proj3 = dense_init(spec.head[1], spec.head[2], Rng::stream(seed, 4).next());
    return m;
}

namespace {

void push_params(std::vector<Tensor>& out, std::vector<bool>* mask, const Model& m) {
    auto add = [&](const Tensor& t, bool trainable) {
        out.push_back(t);
        if (mask) mask->push_back(trainable);
    };
    for (const auto& l : m.encoder.layers) {
        add(l.kernel, l.trainable);
        add(l.bias, l.trainable);
    }
    if (m.proj1_kind == Proj1Kind::TT) {
        add(m.proj1_tt->core1, m.proj1_tt->trainable);
        add(m.proj1_tt->core2, m.proj1_tt->trainable);
        add(m.proj1_tt->bias, m.proj1_tt->trainable);
    } else {
        add(m.proj1_dense->weight, m.proj1_dense->trainable);
        add(m.proj1_dense->bias, m.proj1_dense->trainable);
    }
    for (const auto* l : {&m.proj2, &m.proj3})
        if (*l) {
            add((*l)->weight, (*l)->trainable);
            add((*l)->bias, (*l)->trainable);
        }
    for (const auto& l : m.classifier) {
        add(l.weight, l.trainable);
        add(l.bias, l.trainable);
    }
}

}  // namespace

std::vector<Tensor> Model::parameters() const {
    std::vector<Tensor> out;
    push_params(out, nullptr, *this);
    return out;
}

std::vector<bool> Model::trainable_mask() const {
    std::vector<Tensor> out;
    std::vector<bool> mask;
    push_params(out, &mask, *this);
    return mask;
}

int64_t Model::param_count() const {
    int64_t n = 0;
    for (const auto& t : parameters()) n += t.size();
    return n;
}

void Model::set_encoder_trainable(bool on) {
    for (auto& l : encoder.layers) l.trainable = on;
}

void Model::zero_grads() const {
    for (auto t : parameters()) t.zero_grad();
}

Tensor model_embed(Graph& g, const Model& m, const Tensor& images) {
    if (m.snipped) throw UsageError("model_embed: projection head has been snipped");
    Tensor feat = encoder_forward(g, m.encoder, images);
    Tensor h = m.proj1_kind == Proj1Kind::TT ? tt_forward(g, *m.proj1_tt, feat)
                                             : dense_forward(g, *m.proj1_dense, feat);
    h = g.relu(h);
    h = g.relu(dense_forward(g, *m.proj2, h));
    return dense_forward(g, *m.proj3, h);
}

Tensor model_logits(Graph& g, const Model& m, const Tensor& images) {
    if (!m.snipped || m.classifier.empty())
        throw UsageError("model_logits: model has no classifier head");
    Tensor feat = encoder_forward(g, m.encoder, images);
    Tensor h = m.proj1_kind == Proj1Kind::TT ? tt_forward(g, *m.proj1_tt, feat)
                                             : dense_forward(g, *m.proj1_dense, feat);
    h = g.relu(h);
    for (size_t i = 0; i < m.classifier.size(); ++i) {
        h = dense_forward(g, m.classifier[i], h);
        if (i + 1 < m.classifier.size()) h = g.relu(h);
    }
    return h;
}

void snip_and_attach(Model& m, bool single_layer_classifier, uint64_t seed) {
    if (m.snipped) throw UsageError("snip_and_attach: head already snipped");
    if (!m.proj2 || !m.proj3) throw UsageError("snip_and_attach: projection head incomplete");
    m.proj2.reset();
    m.proj3.reset();
    m.snipped = true;
    m.spec.single_layer_classifier = single_layer_classifier;
    const int64_t width = m.spec.head[0];
    if (single_layer_classifier) {
        m.classifier.push_back(
            dense_init(width, m.spec.num_classes, Rng::stream(seed, 5).next()));
    } else {
        m.classifier.push_back(dense_init(width, width, Rng::stream(seed, 5).next()));
        m.classifier.push_back(
            dense_init(width, m.spec.num_classes, Rng::stream(seed, 6).next()));
    }
}

// ---------------------------------------------------------------------------
// Loss and evaluation
// ---------------------------------------------------------------------------

Tensor cross_entropy(Graph& g, const Tensor& logits, const std::vector<int>& labels) {
    if (logits.rank() != 2 || int64_t(labels.size()) != logits.shape[0])
        throw ShapeError("cross_entropy: logits " + shape_str(logits.shape) + " vs " +
                         std::to_string(labels.size()) + " labels");
    const int64_t B = logits.shape[0], C = logits.shape[1];
    Tensor onehot = zeros({B, C});
    for (int64_t i = 0; i < B; ++i) {
        const int y = labels[size_t(i)];
        if (y < 0 || y >= C)
            throw DataError("cross_entropy: label " + std::to_string(y) +
                            " out of range [0, " + std::to_string(C) + ")");
        (*onehot.data)[size_t(i * C + y)] = 1.0f;
    }
    Tensor row_max = g.max(logits, 1).detached();
    Tensor ones = full({C}, 1.0f);
    Tensor shifted = g.sub(logits, g.contract(row_max, ones, {}));
    Tensor lse = g.add(g.log(g.sum(g.exp(shifted), 1)), row_max);
    Tensor picked = g.sum(g.mul(logits, onehot), 1);
    return g.mean(g.sub(lse, picked));
}

namespace {

Tensor stack_images(const std::vector<Tensor>& images) {
    const int64_t H = images[0].shape[0], W = images[0].shape[1];
    Tensor batch = zeros({int64_t(images.size()), H, W, 3});
    float* p = batch.mut();
    const int64_t stride = H * W * 3;
    for (size_t i = 0; i < images.size(); ++i)
        std::copy(images[i].ptr(), images[i].ptr() + stride, p + int64_t(i) * stride);
    return batch;
}

double now_s() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

}  // namespace

double evaluate_top1(const Model& m, const Dataset& data) {
    if (data.empty()) throw DataError("evaluate_top1: empty dataset");
    const int64_t B = 64;
    int64_t correct = 0;
    for (size_t start = 0; start < data.size(); start += size_t(B)) {
        const size_t end = std::min(data.size(), start + size_t(B));
        std::vector<Tensor> imgs;
        for (size_t i = start; i < end; ++i) imgs.push_back(data.samples[i].image);
        Graph g(false);
        Tensor logits = model_logits(g, m, stack_images(imgs));
        const int64_t C = logits.shape[1];
        for (size_t i = start; i < end; ++i) {
            const float* row = logits.ptr() + int64_t(i - start) * C;
            int best = 0;
            for (int c = 1; c < C; ++c)
                if (row[c] > row[best]) best = c;  // ties keep the lowest index
            if (best == data.samples[i].label) ++correct;
        }
    }
    return double(correct) / double(data.size());
}

// ---------------------------------------------------------------------------
// Training phases
// ---------------------------------------------------------------------------

PretrainResult pretrain(Model& m, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw DataError("pretrain: dataset is empty");
    if (m.snipped) throw UsageError("pretrain: model is already snipped");

    AugmentConfig aug = cfg.aug;
    aug.out_h = aug.out_w = data.image_size;
    aug.seed = cfg.seed;  // augmentation streams hash off the run seed

    const std::vector<Tensor> params = m.parameters();
    AdamState opt;
    PretrainResult result;

    for (int epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        const double t0 = now_s();
        m.set_encoder_trainable(epoch >= cfg.freeze_epochs);
        const std::vector<bool> mask = m.trainable_mask();

        std::vector<size_t> order(data.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng::stream(cfg.seed, 0xE70C, uint64_t(epoch)).shuffle(order.begin(), order.end());

        double loss_sum = 0.0;
        int64_t view_count = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch)) {
            const size_t end = std::min(order.size(), start + size_t(cfg.batch));
            std::vector<Tensor> views;
            for (size_t i = start; i < end; ++i) {
                const size_t idx = order[i];
                // one stream per (epoch, image), so views are independent of
                // batch assembly and worker scheduling
                Rng stream = Rng::stream(aug.seed, uint64_t(epoch), uint64_t(idx), 0xA06);
                views.push_back(augment(data.samples[idx].image, aug, stream));
                views.push_back(augment(data.samples[idx].image, aug, stream));
            }
            Graph g;
            Tensor z = model_embed(g, m, stack_images(views));
            Tensor loss = nt_xent(g, z, cfg.tau);
            m.zero_grads();
            g.backward(loss);
            adam_step(opt, params, mask, lr_at(cfg, result.steps));
            ++result.steps;
            loss_sum += double(loss.item()) * double(views.size());
            view_count += int64_t(views.size());
        }
        result.epochs.push_back({loss_sum / double(view_count), now_s() - t0, -1.0});
    }
    return result;
}

FinetuneResult finetune(Model& m, const Dataset& train, const Dataset& val,
                        const TrainConfig& cfg) {
    cfg.validate();
    if (train.empty()) throw DataError("finetune: training set is empty");
    if (!m.snipped || m.classifier.empty())
        throw UsageError("finetune: model must be snipped with a classifier attached");

    const std::vector<Tensor> params = m.parameters();
    AdamState opt;
    FinetuneResult result;
    int64_t step = 0;

    for (int epoch = 0; epoch < cfg.finetune_epochs; ++epoch) {
        const double t0 = now_s();
        std::vector<size_t> order(train.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng::stream(cfg.seed, 0xF17E, uint64_t(epoch)).shuffle(order.begin(), order.end());

        double loss_sum = 0.0;
        int64_t sample_count = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch)) {
            const size_t end = std::min(order.size(), start + size_t(cfg.batch));
            std::vector<Tensor> imgs;
            std::vector<int> labels;
            for (size_t i = start; i < end; ++i) {
                imgs.push_back(train.samples[order[i]].image);
                labels.push_back(train.samples[order[i]].label);
            }
            Graph g;
            Tensor logits = model_logits(g, m, stack_images(imgs));
            Tensor loss = cross_entropy(g, logits, labels);
            m.zero_grads();
            g.backward(loss);
            adam_step(opt, params, lr_at(cfg, step));
            ++step;
            loss_sum += double(loss.item()) * double(imgs.size());
            sample_count += int64_t(imgs.size());
        }
        EpochStat stat;
        stat.loss = loss_sum / double(sample_count);
        stat.val_top1 = val.empty() ? -1.0 : evaluate_top1(m, val);
        stat.wall_s = now_s() - t0;
        result.epochs.push_back(stat);
    }
    result.final_train_top1 = evaluate_top1(m, train);
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

nlohmann::json spec_to_json(const ModelSpec& s) {
    nlohmann::json j;
    j["image_size"] = s.image_size;
    j["in_channels"] = s.in_channels;
    j["kernel"] = s.encoder.kernel;
    auto& stages = j["stages"] = nlohmann::json::array();
    for (const auto& st : s.encoder.stages) stages.push_back({st.num_layers, st.growth});
    j["tensorized"] = s.tensorized;
    if (s.tensorized)
        j["tt"] = {{"in_a", s.tt.in_a},
                   {"in_b", s.tt.in_b},
                   {"out_c", s.tt.out_c},
                   {"out_d", s.tt.out_d},
                   {"bond", s.tt.bond}};
    j["head"] = s.head;
    j["num_classes"] = s.num_classes;
    j["single_layer_classifier"] = s.single_layer_classifier;
    return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
    ModelSpec s;
    s.image_size = j.at("image_size").get<int>();
    s.in_channels = j.at("in_channels").get<int>();
    s.encoder.kernel = j.at("kernel").get<int>();
    for (const auto& st : j.at("stages"))
        s.encoder.stages.push_back({st.at(0).get<int>(), st.at(1).get<int>()});
    s.tensorized = j.at("tensorized").get<bool>();
    if (s.tensorized) {
        const auto& t = j.at("tt");
        s.tt = {t.at("in_a").get<int64_t>(), t.at("in_b").get<int64_t>(),
                t.at("out_c").get<int64_t>(), t.at("out_d").get<int64_t>(),
                t.at("bond").get<int64_t>()};
    }
    s.head = j.at("head").get<std::vector<int64_t>>();
    s.num_classes = j.at("num_classes").get<int>();
    s.single_layer_classifier = j.at("single_layer_classifier").get<bool>();
    return s;
}

struct NamedLayerTensors {
    std::vector<NamedTensor> tensors;
    std::vector<bool> trainable;
    std::vector<std::string> kinds;
};

}  // namespace

void save_model(const Model& m, const std::filesystem::path& path) {
    std::vector<NamedTensor> tensors;
    nlohmann::json layers = nlohmann::json::array();

    auto add = [&](const std::string& name, const Tensor& t) {
        tensors.push_back({name, t});
    };
    for (size_t i = 0; i < m.encoder.layers.size(); ++i) {
        const auto& l = m.encoder.layers[i];
        const std::string base = "enc." + std::to_string(i);
        add(base + ".kernel", l.kernel);
        add(base + ".bias", l.bias);
        layers.push_back({{"name", base}, {"kind", "conv"}, {"trainable", l.trainable}});
    }
    if (m.proj1_kind == Proj1Kind::TT) {
        add("proj1.core1", m.proj1_tt->core1);
        add("proj1.core2", m.proj1_tt->core2);
        add("proj1.bias", m.proj1_tt->bias);
        layers.push_back(
            {{"name", "proj1"}, {"kind", "tt_dense"}, {"trainable", m.proj1_tt->trainable}});
    } else {
        add("proj1.weight", m.proj1_dense->weight);
        add("proj1.bias", m.proj1_dense->bias);
        layers.push_back(
            {{"name", "proj1"}, {"kind", "dense"}, {"trainable", m.proj1_dense->trainable}});
    }
    if (m.proj2) {
        add("proj2.weight", m.proj2->weight);
        add("proj2.bias", m.proj2->bias);
        layers.push_back(
            {{"name", "proj2"}, {"kind", "dense"}, {"trainable", m.proj2->trainable}});
    }
    if (m.proj3) {
        add("proj3.weight", m.proj3->weight);
        add("proj3.bias", m.proj3->bias);
        layers.push_back(
            {{"name", "proj3"}, {"kind", "dense"}, {"trainable", m.proj3->trainable}});
    }
    for (size_t i = 0; i < m.classifier.size(); ++i) {
        const std::string base = "clf." + std::to_string(i);
        add(base + ".weight", m.classifier[i].weight);
        add(base + ".bias", m.classifier[i].bias);
        layers.push_back(
            {{"name", base}, {"kind", "dense"}, {"trainable", m.classifier[i].trainable}});
    }

    nlohmann::json meta;
    meta["kind"] = "model";
    meta["spec"] = spec_to_json(m.spec);
    meta["snipped"] = m.snipped;
    meta["layers"] = layers;
    write_checkpoint(path, meta, tensors);
}

Model load_model(const std::filesystem::path& path) {
    Checkpoint ck = read_checkpoint(path);
    if (ck.meta.value("kind", "") != "model")
        throw DataError("load_model: checkpoint is not a model: " + path.string());

    Model m;
    m.spec = spec_from_json(ck.meta.at("spec"));
    m.snipped = ck.meta.at("snipped").get<bool>();

    auto take = [&](const std::string& name, bool grad) {
        auto it = ck.tensors.find(name);
        if (it == ck.tensors.end())
            throw DataError("load_model: missing tensor '" + name + "'");
        Tensor t = it->second;
        if (grad) t.set_requires_grad(true);
        return t;
    };
    std::map<std::string, bool> trainable;
    for (const auto& l : ck.meta.at("layers"))
        trainable[l.at("name").get<std::string>()] = l.at("trainable").get<bool>();

    m.encoder.cfg = m.spec.encoder;
    m.encoder.in_channels = m.spec.in_channels;
    for (size_t i = 0;; ++i) {
        const std::string base = "enc." + std::to_string(i);
        if (!ck.tensors.count(base + ".kernel")) break;
        ConvLayer l;
        l.kernel = take(base + ".kernel", true);
        l.bias = take(base + ".bias", true);
        l.trainable = trainable.at(base);
        m.encoder.layers.push_back(std::move(l));
    }
    if (m.spec.tensorized) {
        m.proj1_kind = Proj1Kind::TT;
        TTDenseLayer l;
        l.spec = m.spec.tt;
        l.core1 = take("proj1.core1", true);
        l.core2 = take("proj1.core2", true);
        l.bias = take("proj1.bias", true);
        l.trainable = trainable.at("proj1");
        m.proj1_tt = std::move(l);
    } else {
        m.proj1_kind = Proj1Kind::Dense;
        DenseLayer l;
        l.weight = take("proj1.weight", true);
        l.bias = take("proj1.bias", true);
        l.trainable = trainable.at("proj1");
        m.proj1_dense = std::move(l);
    }
    for (int p = 2; p <= 3; ++p) {
        const std::string base = "proj" + std::to_string(p);
        if (!ck.tensors.count(base + ".weight")) continue;
        DenseLayer l;
        l.weight = take(base + ".weight", true);
        l.bias = take(base + ".bias", true);
        l.trainable = trainable.at(base);
        (p == 2 ? m.proj2 : m.proj3) = std::move(l);
    }
    for (size_t i = 0;; ++i) {
        const std::string base = "clf." + std::to_string(i);
        if (!ck.tensors.count(base + ".weight")) break;
        DenseLayer l;
        l.weight = take(base + ".weight", true);
        l.bias = take(base + ".bias", true);
        l.trainable = trainable.at(base);
        m.classifier.push_back(std::move(l));
    }
    return m;
}

}  // namespace ttml
