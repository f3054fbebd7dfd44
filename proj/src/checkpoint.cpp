#include "llf/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace llf {

using nlohmann::json;

void save_checkpoint(const FlowModel& model, const CheckpointMeta& meta, const std::string& path) {
    const FlowConfig& cfg = model.config();
    json j;
    j["format"] = "llf-checkpoint";
    j["version"] = 1;
    j["task"] = task_name(cfg.task);
    j["flow"] = {{"feature_dim", cfg.feature_dim},
                 {"steps", cfg.steps},
                 {"couplings_per_step", cfg.couplings_per_step},
                 {"hidden", cfg.hidden}};
    j["seed"] = meta.seed;
    if (meta.standardizer) {
        json st;
        st["mean"] = std::vector<double>(meta.standardizer->mean.data(),
                                         meta.standardizer->mean.data() + meta.standardizer->mean.size());
        st["std"] = std::vector<double>(meta.standardizer->stddev.data(),
                                        meta.standardizer->stddev.data() + meta.standardizer->stddev.size());
        j["standardizer"] = st;
    }
    if (meta.scaler) j["label_scaler"] = {{"lo", meta.scaler->lo}, {"hi", meta.scaler->hi}};

    json params = json::array();
    const ParamStore& store = model.params();
    for (std::size_t e = 0; e < store.entry_count(); ++e) {
        const ParamStore::Entry& entry = store.entry(static_cast<int>(e));
        json t;
        t["name"] = entry.name;
        t["shape"] = {entry.rows, entry.cols};
        const double* base = store.values().data() + entry.offset;
        t["data"] = std::vector<double>(base, base + entry.size());
        params.push_back(std::move(t));
    }
    j["params"] = std::move(params);

    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << j.dump() << '\n';
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
    json j;
    in >> j;
    if (j.value("format", "") != "llf-checkpoint")
        throw std::runtime_error("not a checkpoint file: " + path);

    FlowConfig cfg;
    cfg.task = task_from_name(j.at("task").get<std::string>());
    cfg.feature_dim = j.at("flow").at("feature_dim").get<int>();
    cfg.steps = j.at("flow").at("steps").get<int>();
    cfg.couplings_per_step = j.at("flow").at("couplings_per_step").get<int>();
    cfg.hidden = j.at("flow").at("hidden").get<int>();

    LoadedCheckpoint loaded{FlowModel(cfg), {}};
    loaded.meta.seed = j.value("seed", 0ull);
    if (j.contains("standardizer")) {
        Standardizer st;
        const auto mean = j["standardizer"].at("mean").get<std::vector<double>>();
        const auto sd = j["standardizer"].at("std").get<std::vector<double>>();
        st.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(mean.size()));
        st.stddev = Eigen::Map<const Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
        loaded.meta.standardizer = std::move(st);
    }
    if (j.contains("label_scaler"))
        loaded.meta.scaler = LabelScaler(j["label_scaler"].at("lo").get<double>(),
                                         j["label_scaler"].at("hi").get<double>());

    ParamStore& store = loaded.model.params();
    for (const json& t : j.at("params")) {
        const std::string name = t.at("name").get<std::string>();
        const int id = store.find(name);
        const ParamStore::Entry& entry = store.entry(id);
        const auto shape = t.at("shape").get<std::vector<int>>();
        if (shape.size() != 2 || shape[0] != entry.rows || shape[1] != entry.cols)
            throw std::runtime_error("checkpoint tensor shape mismatch for " + name);
        const auto data = t.at("data").get<std::vector<double>>();
        if (data.size() != entry.size())
            throw std::runtime_error("checkpoint tensor size mismatch for " + name);
        std::copy(data.begin(), data.end(), store.values().begin() + static_cast<std::ptrdiff_t>(entry.offset));
    }
    return loaded;
}

} // namespace llf
