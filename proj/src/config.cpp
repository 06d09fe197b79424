#include "fedtilt/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace fedtilt {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string parse_value(std::string raw, int line_no) {
    raw = trim(raw);
    if (!raw.empty() && raw.front() == '"') {
        const std::size_t close = raw.find('"', 1);
        if (close == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": unterminated string");
        return raw.substr(1, close - 1);
    }
    const std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = trim(raw.substr(0, hash));
    if (raw.empty())
        throw ConfigError("line " + std::to_string(line_no) + ": missing value");
    return raw;
}

class TypedMap {
  public:
    explicit TypedMap(const ConfigMap& map) : map_(map) {}

    std::string get_string(const std::string& key, const std::string& fallback) {
        seen_.insert(key);
        const auto it = map_.find(key);
        return it == map_.end() ? fallback : it->second;
    }

    double get_double(const std::string& key, double fallback) {
        seen_.insert(key);
        const auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        try {
            std::size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected a number, got '" + it->second +
                              "'");
        }
    }

    int get_int(const std::string& key, int fallback) {
        const double v = get_double(key, fallback);
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            throw ConfigError("key '" + key + "': expected an integer");
        return i;
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) {
        seen_.insert(key);
        const auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        try {
            std::size_t used = 0;
            const std::uint64_t v = std::stoull(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument("");
            return v;
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': expected an unsigned integer");
        }
    }

    bool get_bool(const std::string& key, bool fallback) {
        seen_.insert(key);
        const auto it = map_.find(key);
        if (it == map_.end()) return fallback;
        if (it->second == "true") return true;
        if (it->second == "false") return false;
        throw ConfigError("key '" + key + "': expected true or false");
    }

    void reject_unknown() const {
        for (const auto& [key, value] : map_)
            if (!seen_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    }

  private:
    const ConfigMap& map_;
    std::set<std::string> seen_;
};

std::vector<int> parse_int_list(const std::string& text, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        try {
            out.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("key '" + key + "': bad integer list entry '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError("key '" + key + "': empty list");
    return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

std::string double_text(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
    ConfigMap map;
    std::stringstream ss(text);
    std::string line;
    int line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') continue;
        if (stripped.front() == '[')
            throw ConfigError("line " + std::to_string(line_no) +
                              ": sections are not supported");
        const std::size_t eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty())
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        map[key] = parse_value(stripped.substr(eq + 1), line_no);
    }
    return map;
}

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream file(path);
    if (!file) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << file.rdbuf();
    return parse_config_text(buf.str());
}

void apply_override(ConfigMap& map, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("bad --set override '" + assignment + "', expected KEY=VALUE");
    map[trim(assignment.substr(0, eq))] = trim(assignment.substr(eq + 1));
}

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& map) {
    TypedMap typed(map);
    ExperimentConfig cfg;

    const std::string dataset = typed.get_string("dataset", "toy1");
    if (dataset == "toy1") cfg.dataset = DatasetKind::Toy1;
    else if (dataset == "toy2") cfg.dataset = DatasetKind::Toy2;
    else if (dataset == "toy3") cfg.dataset = DatasetKind::Toy3;
    else if (dataset == "blobs") cfg.dataset = DatasetKind::Blobs;
    else if (dataset == "idx") cfg.dataset = DatasetKind::Idx;
    else throw ConfigError("unknown dataset '" + dataset + "'");

    const std::string method = typed.get_string("method", "fedtilt");
    if (method == "fedtilt") cfg.method = MethodKind::FedTilt;
    else if (method == "fedavg") cfg.method = MethodKind::FedAvg;
    else if (method == "fedprox") cfg.method = MethodKind::FedProx;
    else if (method == "ditto") cfg.method = MethodKind::Ditto;
    else throw ConfigError("unknown method '" + method + "'");

    const bool is_toy = dataset.rfind("toy", 0) == 0;
    const std::string model =
        typed.get_string("model", is_toy ? "logistic"
                                         : (cfg.dataset == DatasetKind::Idx ? "mlp"
                                                                            : "softmax"));
    if (model == "logistic") cfg.model = ModelKind::LogisticBinary;
    else if (model == "softmax") cfg.model = ModelKind::SoftmaxLinear;
    else if (model == "mlp") cfg.model = ModelKind::Mlp;
    else throw ConfigError("unknown model '" + model + "'");
    cfg.hidden_dims = parse_int_list(typed.get_string("hidden_dims", "128,64"),
                                     "hidden_dims");

    cfg.num_clients = typed.get_int("num_clients", is_toy ? 2 : 20);
    if (is_toy && cfg.num_clients != 2)
        throw ConfigError("toy datasets always use 2 clients");
    cfg.classes_per_client = typed.get_int("classes_per_client", 2);
    cfg.blob_classes = typed.get_int("blob_classes", 10);
    cfg.blob_per_class = typed.get_int("blob_per_class", 100);
    cfg.blob_dim = typed.get_int("blob_dim", 10);
    cfg.blob_spread = typed.get_double("blob_spread", 0.35);
    cfg.idx_images = typed.get_string("idx_images", "");
    cfg.idx_labels = typed.get_string("idx_labels", "");
    cfg.idx_limit = typed.get_int("idx_limit", 0);

    cfg.run.num_clients = cfg.num_clients;
    cfg.run.participation_fraction = typed.get_double("participation", 1.0);
    cfg.run.batch_size = typed.get_int("batch_size", 10);
    cfg.run.global_rounds = typed.get_int("rounds", 20);
    cfg.run.client_epochs = typed.get_int("client_epochs", 10);
    cfg.run.server_epochs = typed.get_int("server_epochs", 50);
    cfg.run.lr_client = typed.get_double("lr_client", 0.01);
    cfg.run.lr_personal = typed.get_double("lr_personal", 0.01);
    cfg.run.lr_server = typed.get_double("lr_server", 0.1);
    cfg.run.tilt.q = typed.get_double("q", 0.0);
    cfg.run.tilt.tau = typed.get_double("tau", 0.0);
    cfg.run.tilt.lambda = typed.get_double("lambda", 0.0);
    cfg.run.tilt.mu = typed.get_double("mu", 0.01);
    cfg.run.seed = typed.get_u64("seed", 1);
    cfg.run.analytic_q0_server = typed.get_bool("analytic_q0_server", false);

    cfg.outlier = typed.get_string("outlier", "none");
    if (cfg.outlier != "none" && cfg.outlier != "gaussian" && cfg.outlier != "pixel")
        throw ConfigError("unknown outlier kind '" + cfg.outlier + "'");
    cfg.gaussian.mean = typed.get_double("outlier_mean", 0.0);
    cfg.gaussian.std = typed.get_double("outlier_std", 0.15);
    cfg.gaussian.sample_fraction = typed.get_double("outlier_sample_fraction", 0.1);
    const int target = typed.get_int("outlier_target_class", -1);
    cfg.gaussian.target_class =
        target >= 0 ? std::optional<int>(target) : std::nullopt;
    cfg.pixel.pixel_fraction = typed.get_double("outlier_pixel_fraction", 0.3);
    cfg.pixel.sample_fraction = typed.get_double("outlier_sample_fraction", 0.3);
    cfg.outlier_persistent = typed.get_bool("outlier_persistent", true);

    typed.reject_unknown();

    try {
        cfg.run.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("invalid run parameters: ") + e.what());
    }
    return cfg;
}

ConfigMap ExperimentConfig::canonical_map() const {
    ConfigMap map;
    map["dataset"] = dataset == DatasetKind::Toy1    ? "toy1"
                     : dataset == DatasetKind::Toy2  ? "toy2"
                     : dataset == DatasetKind::Toy3  ? "toy3"
                     : dataset == DatasetKind::Blobs ? "blobs"
                                                     : "idx";
    map["method"] = method == MethodKind::FedTilt   ? "fedtilt"
                    : method == MethodKind::FedAvg  ? "fedavg"
                    : method == MethodKind::FedProx ? "fedprox"
                                                    : "ditto";
    map["model"] = model == ModelKind::LogisticBinary  ? "logistic"
                   : model == ModelKind::SoftmaxLinear ? "softmax"
                                                       : "mlp";
    {
        std::string dims;
        for (std::size_t i = 0; i < hidden_dims.size(); ++i)
            dims += (i ? "," : "") + std::to_string(hidden_dims[i]);
        map["hidden_dims"] = dims;
    }
    map["num_clients"] = std::to_string(num_clients);
    map["classes_per_client"] = std::to_string(classes_per_client);
    map["blob_classes"] = std::to_string(blob_classes);
    map["blob_per_class"] = std::to_string(blob_per_class);
    map["blob_dim"] = std::to_string(blob_dim);
    map["blob_spread"] = double_text(blob_spread);
    map["idx_images"] = idx_images;
    map["idx_labels"] = idx_labels;
    map["idx_limit"] = std::to_string(idx_limit);
    map["participation"] = double_text(run.participation_fraction);
    map["batch_size"] = std::to_string(run.batch_size);
    map["rounds"] = std::to_string(run.global_rounds);
    map["client_epochs"] = std::to_string(run.client_epochs);
    map["server_epochs"] = std::to_string(run.server_epochs);
    map["lr_client"] = double_text(run.lr_client);
    map["lr_personal"] = double_text(run.lr_personal);
    map["lr_server"] = double_text(run.lr_server);
    map["q"] = double_text(run.tilt.q);
    map["tau"] = double_text(run.tilt.tau);
    map["lambda"] = double_text(run.tilt.lambda);
    map["mu"] = double_text(run.tilt.mu);
    map["seed"] = std::to_string(run.seed);
    map["analytic_q0_server"] = bool_text(run.analytic_q0_server);
    map["outlier"] = outlier;
    map["outlier_mean"] = double_text(gaussian.mean);
    map["outlier_std"] = double_text(gaussian.std);
    map["outlier_sample_fraction"] = double_text(outlier == "pixel"
                                                     ? pixel.sample_fraction
                                                     : gaussian.sample_fraction);
    map["outlier_target_class"] =
        std::to_string(gaussian.target_class ? *gaussian.target_class : -1);
    map["outlier_pixel_fraction"] = double_text(pixel.pixel_fraction);
    map["outlier_persistent"] = bool_text(outlier_persistent);
    return map;
}

std::string ExperimentConfig::canonical_text() const {
    std::string text;
    for (const auto& [key, value] : canonical_map()) text += key + " = " + value + "\n";
    return text;
}

std::string ExperimentConfig::config_hash() const {
    // FNV-1a, 64-bit.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_text()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

FederatedDataset ExperimentConfig::build_dataset() const {
    switch (dataset) {
        case DatasetKind::Toy1:
            return gen_toy(1, run.seed);
        case DatasetKind::Toy2:
            return gen_toy(2, run.seed);
        case DatasetKind::Toy3:
            return gen_toy(3, run.seed);
        case DatasetKind::Blobs: {
            auto pool =
                gen_blobs(blob_classes, blob_per_class, blob_dim, blob_spread, run.seed);
            return partition_noniid(pool, num_clients, classes_per_client, run.seed);
        }
        case DatasetKind::Idx: {
            if (idx_images.empty() || idx_labels.empty())
                throw ConfigError("dataset 'idx' requires idx_images and idx_labels");
            auto pool = load_idx(idx_images, idx_labels);
            if (idx_limit > 0 && static_cast<std::size_t>(idx_limit) < pool.size())
                pool.resize(idx_limit);
            return partition_noniid(pool, num_clients, classes_per_client, run.seed);
        }
    }
    throw std::logic_error("unknown dataset kind");
}

ModelSpec ExperimentConfig::model_spec(const FederatedDataset& ds) const {
    ModelSpec spec;
    spec.kind = model;
    spec.input_dim = ds.input_dim;
    spec.num_classes = ds.num_classes;
    if (model == ModelKind::Mlp) spec.hidden_dims = hidden_dims;
    if (model == ModelKind::LogisticBinary && ds.num_classes != 2)
        throw ConfigError("logistic model requires a binary dataset");
    spec.validate();
    return spec;
}

std::optional<OutlierSpec> ExperimentConfig::outlier_spec() const {
    if (outlier == "none") return std::nullopt;
    OutlierSpec spec;
    if (outlier == "gaussian") spec.kind = gaussian;
    else spec.kind = pixel;
    spec.persistent = outlier_persistent;
    spec.validate();
    return spec;
}

std::optional<BaselineKind> ExperimentConfig::baseline_kind() const {
    switch (method) {
        case MethodKind::FedTilt:
            return std::nullopt;
        case MethodKind::FedAvg:
            return BaselineKind{BaselineMethod::FedAvg, 0.0};
        case MethodKind::FedProx:
            return BaselineKind{BaselineMethod::FedProx, run.tilt.mu};
        case MethodKind::Ditto:
            return BaselineKind{BaselineMethod::Ditto, run.tilt.mu};
    }
    throw std::logic_error("unknown method kind");
}

}  // namespace fedtilt
