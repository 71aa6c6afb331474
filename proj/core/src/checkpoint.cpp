// Copyright 2026 The protoseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "protoseg/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "protoseg/textconf.hpp"

namespace protoseg {

namespace {

constexpr char kMagic[] = "protoseg-checkpoint-v1";
constexpr char kHeaderEnd[] = "\n---\n";

std::string join_ints(const std::vector<int>& v, char sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += sep;
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> split_ints(const std::string& s, char sep) {
    std::vector<int> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep))
        if (!cur.empty()) out.push_back(std::stoi(cur));
    return out;
}

void write_model_config(TextConfig& h, const ModelConfig& mc) {
    h.set("model.image_size", mc.image_size);
    h.set("model.encoder_widths", join_ints(mc.encoder.channel_widths, ','));
    h.set("model.encoder_dilation", mc.encoder.dilation_last_stage);
    h.set("model.aspp_rates", join_ints(mc.aspp_rates, ','));
    h.set("model.use_pff", mc.use_pff);
    h.set("model.multiclass_channels", mc.multiclass_channels);
    h.set("model.reduction", std::string(reduction_name(mc.reduction)));
}

ModelConfig read_model_config(const TextConfig& h) {
    ModelConfig mc;
    mc.image_size = static_cast<int>(h.get_int("model.image_size"));
    mc.encoder.channel_widths = split_ints(h.get("model.encoder_widths"), ',');
    mc.encoder.dilation_last_stage = static_cast<int>(h.get_int("model.encoder_dilation"));
    mc.aspp_rates = split_ints(h.get("model.aspp_rates"), ',');
    mc.use_pff = h.get_bool("model.use_pff");
    mc.multiclass_channels = static_cast<int>(h.get_int("model.multiclass_channels"));
    mc.reduction = reduction_from_name(h.get("model.reduction"));
    return mc;
}

void write_train_config(TextConfig& h, const TrainConfig& tc) {
    h.set("train.episodes", tc.episodes);
    h.set("train.lr0", tc.lr0);
    h.set("train.momentum", tc.momentum);
    h.set("train.weight_decay", tc.weight_decay);
    h.set("train.poly_power", tc.poly_power);
    h.set("train.batch_size", tc.batch_size);
    h.set("train.lambda_mcl", tc.lambda_mcl);
    h.set("train.seed", tc.seed);
    h.set("train.use_pff", tc.flags.use_pff);
    h.set("train.use_mcl", tc.flags.use_mcl);
    h.set("train.use_spt", tc.flags.use_spt);
    h.set("train.freeze_encoder", tc.flags.freeze_encoder);
    h.set("train.reduction", std::string(reduction_name(tc.reduction)));
    h.set("train.val_interval", tc.val_interval);
    h.set("train.val_episodes", tc.val_episodes);
}

TrainConfig read_train_config(const TextConfig& h) {
    TrainConfig tc;
    tc.episodes = static_cast<int>(h.get_int("train.episodes"));
    tc.lr0 = h.get_double("train.lr0");
    tc.momentum = h.get_double("train.momentum");
    tc.weight_decay = h.get_double("train.weight_decay");
    tc.poly_power = h.get_double("train.poly_power");
    tc.batch_size = static_cast<int>(h.get_int("train.batch_size"));
    tc.lambda_mcl = h.get_double("train.lambda_mcl");
    tc.seed = static_cast<std::uint64_t>(h.get_int("train.seed"));
    tc.flags.use_pff = h.get_bool("train.use_pff");
    tc.flags.use_mcl = h.get_bool("train.use_mcl");
    tc.flags.use_spt = h.get_bool("train.use_spt");
    tc.flags.freeze_encoder = h.get_bool("train.freeze_encoder");
    tc.reduction = reduction_from_name(h.get("train.reduction"));
    tc.val_interval = static_cast<int>(h.get_int("train.val_interval"));
    tc.val_episodes = static_cast<int>(h.get_int("train.val_episodes"));
    return tc;
}

std::string shape_string(const std::vector<int>& shape) { return join_ints(shape, 'x'); }

}  // namespace

void save_checkpoint(const std::string& path, OneShotModel<float>& model,
                     const TrainConfig& train_config, const SplitConfig& split,
                     const std::vector<ValidationRecord>& history, int episodes_completed) {
    static_assert(sizeof(float) == 4);
    // Blobs are little-endian on disk; raw memcpy is only valid on LE hosts.
    static_assert(std::endian::native == std::endian::little,
                  "checkpoint blobs require byte swapping on big-endian hosts");

    TextConfig h;
    h.set("format", std::string(kMagic));
    write_model_config(h, model.config());
    write_train_config(h, train_config);
    h.set("split.index", split.split_index);
    h.set("split.train_classes", join_ints(split.train_classes, ','));
    h.set("split.test_classes", join_ints(split.test_classes, ','));
    h.set("episodes_completed", episodes_completed);

    h.set("history.count", static_cast<int>(history.size()));
    for (std::size_t i = 0; i < history.size(); ++i) {
        h.set("history.h" + std::to_string(i),
              std::to_string(history[i].episode) + " " + format_double(history[i].mean_iou));
    }

    const auto params = model.params();
    std::size_t total = 0;
    h.set("params.count", static_cast<int>(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        h.set("params.p" + std::to_string(i) + ".name", p.name);
        h.set("params.p" + std::to_string(i) + ".shape", shape_string(p.value->shape()));
        h.set("params.p" + std::to_string(i) + ".offset", static_cast<long long>(total));
        total += p.value->size();
    }
    h.set("blob.floats", static_cast<long long>(total));

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f << h.dump() << "---\n";
    for (const auto& p : params) {
        f.write(reinterpret_cast<const char*>(p.value->data()),
                static_cast<std::streamsize>(p.value->size() * sizeof(float)));
    }
    if (!f) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    const std::size_t marker = bytes.find(kHeaderEnd);
    if (marker == std::string::npos)
        throw std::runtime_error("load_checkpoint: missing header terminator in " + path);
    const TextConfig h = TextConfig::parse(bytes.substr(0, marker + 1));
    if (h.get_or("format", "") != kMagic)
        throw std::runtime_error("load_checkpoint: unrecognized checkpoint format");

    LoadedCheckpoint out;
    out.model_config = read_model_config(h);
    out.train_config = read_train_config(h);
    out.split.split_index = static_cast<int>(h.get_int("split.index"));
    out.split.train_classes = split_ints(h.get("split.train_classes"), ',');
    out.split.test_classes = split_ints(h.get("split.test_classes"), ',');
    out.episodes_completed = static_cast<int>(h.get_int("episodes_completed"));

    const int hist = static_cast<int>(h.get_int("history.count"));
    for (int i = 0; i < hist; ++i) {
        std::istringstream line(h.get("history.h" + std::to_string(i)));
        ValidationRecord rec;
        line >> rec.episode >> rec.mean_iou;
        out.history.push_back(rec);
    }

    out.model = OneShotModel<float>(out.model_config);
    const auto params = out.model.params();
    const int count = static_cast<int>(h.get_int("params.count"));
    if (count != static_cast<int>(params.size()))
        throw std::runtime_error("load_checkpoint: parameter manifest size mismatch");
    const std::size_t blob_floats = static_cast<std::size_t>(h.get_int("blob.floats"));

    const char* blob = bytes.data() + marker + std::strlen(kHeaderEnd);
    const std::size_t blob_bytes = bytes.size() - (marker + std::strlen(kHeaderEnd));
    if (blob_bytes != blob_floats * sizeof(float))
        throw std::runtime_error("load_checkpoint: blob size mismatch");

    for (int i = 0; i < count; ++i) {
        const std::string base = "params.p" + std::to_string(i);
        const std::string name = h.get(base + ".name");
        if (name != params[static_cast<std::size_t>(i)].name)
            throw std::runtime_error("load_checkpoint: parameter order mismatch at " + name);
        const std::vector<int> shape = split_ints(h.get(base + ".shape"), 'x');
        Tensor<float>* dst = params[static_cast<std::size_t>(i)].value;
        if (shape != dst->shape())
            throw std::runtime_error("load_checkpoint: shape mismatch for " + name);
        const std::size_t offset = static_cast<std::size_t>(h.get_int(base + ".offset"));
        if ((offset + dst->size()) * sizeof(float) > blob_bytes)
            throw std::runtime_error("load_checkpoint: blob overrun for " + name);
        std::memcpy(dst->data(), blob + offset * sizeof(float), dst->size() * sizeof(float));
    }
    return out;
}

}  // namespace protoseg
