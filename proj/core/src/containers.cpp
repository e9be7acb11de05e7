// SPDX-License-Identifier: Apache-2.0
#include "tdx/containers.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tdx {

namespace {

using json = nlohmann::json;

// ---- byte-level helpers (explicit little-endian) -------------------------

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
    uint64_t v;
    std::memcpy(&v, &d, sizeof(v));
    put_u64(out, v);
}

class Reader {
  public:
    Reader(std::string bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

    size_t pos() const { return pos_; }
    size_t remaining() const { return bytes_.size() - pos_; }

    void need(size_t n, const char* what) const {
        if (remaining() < n) {
            throw FormatError(path_ + ": truncated while reading " + what + " at byte " +
                              std::to_string(pos_) + " (need " + std::to_string(n) + " bytes, have " +
                              std::to_string(remaining()) + ")");
        }
    }

    void expect_magic(const char* magic) {
        need(4, "magic");
        if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
            std::ostringstream os;
            os << path_ << ": magic mismatch at byte 0: expected \"" << magic << "\", found bytes";
            for (int i = 0; i < 4; ++i) {
                char buf[8];
                std::snprintf(buf, sizeof(buf), " %02x", static_cast<unsigned char>(bytes_[pos_ + i]));
                os << buf;
            }
            throw FormatError(os.str());
        }
        pos_ += 4;
    }

    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }

    uint64_t u64(const char* what) {
        need(8, what);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }

    double f64(const char* what) {
        const uint64_t v = u64(what);
        double d;
        std::memcpy(&d, &v, sizeof(d));
        return d;
    }

    std::string str(size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void done(const char* what) const {
        if (remaining() != 0) {
            throw FormatError(path_ + ": " + std::to_string(remaining()) + " unexpected trailing bytes after " +
                              what + " at byte " + std::to_string(pos_));
        }
    }

    const std::string& path() const { return path_; }

  private:
    std::string bytes_;
    std::string path_;
    size_t pos_ = 0;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open for reading");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void atomic_write(const std::string& path, const std::string& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw FormatError(tmp + ": cannot open for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw FormatError(tmp + ": short write");
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw FormatError(path + ": atomic rename failed");
    }
}

uint32_t check_version(uint32_t version, const std::string& path) {
    if (version != kContainerVersion) {
        throw FormatError(path + ": unsupported format version " + std::to_string(version) +
                          " (this build reads version " + std::to_string(kContainerVersion) + ")");
    }
    return version;
}

json model_config_to_json(const ModelConfig& c) {
    return json{{"depth", c.depth},
                {"heads", c.heads},
                {"head_dim", c.head_dim},
                {"value_dim", c.value_dim},
                {"in_dim", c.in_dim},
                {"out_dim", c.out_dim},
                {"mlp_dim", c.mlp_dim},
                {"kernel", to_string(c.kernel)},
                {"temperature", c.temperature},
                {"tie_weights", c.tie_weights},
                {"use_g", c.use_g},
                {"context_self_attention", c.context_self_attention}};
}

ModelConfig model_config_from_json(const json& j) {
    ModelConfig c;
    c.depth = j.at("depth").get<int>();
    c.heads = j.at("heads").get<int>();
    c.head_dim = j.at("head_dim").get<int>();
    c.value_dim = j.at("value_dim").get<int>();
    c.in_dim = j.at("in_dim").get<int>();
    c.out_dim = j.at("out_dim").get<int>();
    c.mlp_dim = j.at("mlp_dim").get<int>();
    c.kernel = kernel_variant_from_string(j.at("kernel").get<std::string>());
    c.temperature = j.at("temperature").get<double>();
    c.tie_weights = j.at("tie_weights").get<bool>();
    c.use_g = j.at("use_g").get<bool>();
    c.context_self_attention = j.at("context_self_attention").get<bool>();
    return c;
}

} // namespace

void write_meta_dataset(const std::string& path, const MetaDataset& meta) {
    if (meta.size() < 1) throw TdxError("write_meta_dataset: empty meta-dataset");
    const int grid_n = meta.datasets.front().grid.n;
    const int pairs = meta.datasets.front().size();
    const int dim = meta.datasets.front().pairs.front().v.dim;
    json per_dataset = json::array();
    for (const OperatorDataset& ds : meta.datasets) {
        if (ds.grid.n != grid_n || ds.size() != pairs) {
            throw TdxError("write_meta_dataset: datasets must share grid size and pair count");
        }
        per_dataset.push_back(json{{"k_reaction", ds.coeffs.k_reaction},
                                   {"target_time", ds.target_time},
                                   {"dt_used", ds.dt_used}});
    }
    json meta_json{
        {"grid_n", grid_n},
        {"codomain_dim", dim},
        {"pairs_per_dataset", pairs},
        {"dataset_count", meta.size()},
        {"split", meta.split},
        {"generation",
         json{{"seed", meta.config.seed},
              {"l", meta.config.l},
              {"t", meta.config.t},
              {"dt", meta.config.dt},
              {"clamp_dt", meta.config.clamp_dt},
              {"k_min", meta.config.k_min},
              {"k_max", meta.config.k_max},
              {"max_retries", meta.config.max_retries},
              {"n_datasets", meta.config.n_datasets},
              {"pairs_per_dataset", meta.config.pairs_per_dataset},
              {"grid_n", meta.config.grid_n}}},
        {"per_dataset", std::move(per_dataset)}};
    const std::string js = meta_json.dump();

    std::string out;
    out.reserve(js.size() + static_cast<size_t>(meta.size()) * pairs * grid_n * dim * 16 + 64);
    out += "TDXD";
    put_u32(out, kContainerVersion);
    put_u64(out, js.size());
    out += js;
    for (const OperatorDataset& ds : meta.datasets) {
        for (const FunctionPair& p : ds.pairs) {
            for (double v : p.v.values) put_f64(out, v);
            for (double v : p.u.values) put_f64(out, v);
        }
    }
    atomic_write(path, out);
}

MetaDataset read_meta_dataset(const std::string& path) {
    Reader r(slurp(path), path);
    r.expect_magic("TDXD");
    check_version(r.u32("version"), path);
    const uint64_t json_len = r.u64("metadata length");
    json meta_json;
    try {
        meta_json = json::parse(r.str(json_len, "metadata"));
    } catch (const json::exception& e) {
        throw FormatError(path + ": metadata JSON parse failed: " + e.what());
    }

    MetaDataset meta;
    const int grid_n = meta_json.at("grid_n").get<int>();
    const int dim = meta_json.at("codomain_dim").get<int>();
    const int pairs = meta_json.at("pairs_per_dataset").get<int>();
    const int count = meta_json.at("dataset_count").get<int>();
    meta.split = meta_json.at("split").get<std::string>();
    const json& gen = meta_json.at("generation");
    meta.config.seed = gen.at("seed").get<uint64_t>();
    meta.config.l = gen.at("l").get<double>();
    meta.config.t = gen.at("t").get<double>();
    meta.config.dt = gen.at("dt").get<double>();
    meta.config.clamp_dt = gen.at("clamp_dt").get<bool>();
    meta.config.k_min = gen.at("k_min").get<double>();
    meta.config.k_max = gen.at("k_max").get<double>();
    meta.config.max_retries = gen.at("max_retries").get<int>();
    meta.config.n_datasets = gen.at("n_datasets").get<int>();
    meta.config.pairs_per_dataset = gen.at("pairs_per_dataset").get<int>();
    meta.config.grid_n = gen.at("grid_n").get<int>();
    const json& per_dataset = meta_json.at("per_dataset");
    if (static_cast<int>(per_dataset.size()) != count) {
        throw FormatError(path + ": per_dataset entries (" + std::to_string(per_dataset.size()) +
                          ") do not match dataset_count (" + std::to_string(count) + ")");
    }

    const uint64_t expected_doubles =
        static_cast<uint64_t>(count) * pairs * 2ULL * grid_n * dim;
    if (r.remaining() != expected_doubles * 8) {
        throw FormatError(path + ": payload length " + std::to_string(r.remaining()) +
                          " bytes at byte " + std::to_string(r.pos()) + ", expected " +
                          std::to_string(expected_doubles * 8));
    }

    const Grid1D grid(grid_n);
    for (int d = 0; d < count; ++d) {
        OperatorDataset ds;
        ds.grid = grid;
        ds.coeffs.k_reaction = per_dataset[static_cast<size_t>(d)].at("k_reaction").get<double>();
        ds.target_time = per_dataset[static_cast<size_t>(d)].at("target_time").get<double>();
        ds.dt_used = per_dataset[static_cast<size_t>(d)].at("dt_used").get<double>();
        ds.seed = meta.config.seed;
        ds.pairs.reserve(static_cast<size_t>(pairs));
        for (int p = 0; p < pairs; ++p) {
            GridFunction v(grid, dim), u(grid, dim);
            for (double& x : v.values) x = r.f64("payload");
            for (double& x : u.values) x = r.f64("payload");
            ds.pairs.push_back({std::move(v), std::move(u)});
        }
        meta.datasets.push_back(std::move(ds));
    }
    r.done("payload");
    return meta;
}

void write_checkpoint(const std::string& path, const TransducerParams& params,
                      const Provenance& provenance, const AdamState* adam) {
    const std::vector<ParamSpec> layout = param_layout(params.config);
    if (layout.size() != params.tensors.size()) {
        throw TdxError("write_checkpoint: parameter count does not match config layout");
    }
    json meta_json{{"model_config", model_config_to_json(params.config)},
                   {"provenance",
                    json{{"steps", provenance.steps},
                         {"final_loss", provenance.final_loss},
                         {"seed", provenance.seed},
                         {"adam_t", adam != nullptr ? adam->t : 0}}},
                   {"has_adam", adam != nullptr}};
    const std::string js = meta_json.dump();

    struct Entry {
        std::string name;
        const Tensor* tensor;
    };
    std::vector<Entry> entries;
    for (size_t i = 0; i < layout.size(); ++i) {
        if (params.names[i] != layout[i].name) {
            throw TdxError("write_checkpoint: parameter order mismatch at '" + params.names[i] + "'");
        }
        entries.push_back({layout[i].name, &params.tensors[i]});
    }
    if (adam != nullptr) {
        if (adam->m.size() != params.tensors.size() || adam->v.size() != params.tensors.size()) {
            throw TdxError("write_checkpoint: optimizer state size mismatch");
        }
        for (size_t i = 0; i < layout.size(); ++i) entries.push_back({"adam.m." + layout[i].name, &adam->m[i]});
        for (size_t i = 0; i < layout.size(); ++i) entries.push_back({"adam.v." + layout[i].name, &adam->v[i]});
    }

    std::string out;
    out += "TDXC";
    put_u32(out, kContainerVersion);
    put_u64(out, js.size());
    out += js;
    put_u64(out, entries.size());
    uint64_t offset = 0;
    for (const Entry& e : entries) {
        put_u32(out, static_cast<uint32_t>(e.name.size()));
        out += e.name;
        put_u32(out, static_cast<uint32_t>(e.tensor->rank()));
        for (int64_t d : e.tensor->shape()) put_u64(out, static_cast<uint64_t>(d));
        put_u64(out, offset);
        offset += static_cast<uint64_t>(e.tensor->numel());
    }
    put_u64(out, offset);
    for (const Entry& e : entries) {
        for (int64_t i = 0; i < e.tensor->numel(); ++i) put_f64(out, (*e.tensor)[i]);
    }
    atomic_write(path, out);
}

Checkpoint read_checkpoint(const std::string& path) {
    Reader r(slurp(path), path);
    r.expect_magic("TDXC");
    check_version(r.u32("version"), path);
    const uint64_t json_len = r.u64("metadata length");
    json meta_json;
    try {
        meta_json = json::parse(r.str(json_len, "metadata"));
    } catch (const json::exception& e) {
        throw FormatError(path + ": metadata JSON parse failed: " + e.what());
    }

    Checkpoint ck;
    ck.params.config = model_config_from_json(meta_json.at("model_config"));
    ck.provenance.steps = meta_json.at("provenance").at("steps").get<int64_t>();
    ck.provenance.final_loss = meta_json.at("provenance").at("final_loss").get<double>();
    ck.provenance.seed = meta_json.at("provenance").at("seed").get<uint64_t>();
    const bool has_adam = meta_json.at("has_adam").get<bool>();

    struct Entry {
        std::string name;
        std::vector<int64_t> shape;
        uint64_t offset;
    };
    const uint64_t n_entries = r.u64("table count");
    std::vector<Entry> entries;
    entries.reserve(n_entries);
    for (uint64_t i = 0; i < n_entries; ++i) {
        Entry e;
        const uint32_t name_len = r.u32("entry name length");
        e.name = r.str(name_len, "entry name");
        const uint32_t rank = r.u32("entry rank");
        for (uint32_t d = 0; d < rank; ++d) e.shape.push_back(static_cast<int64_t>(r.u64("entry dim")));
        e.offset = r.u64("entry offset");
        entries.push_back(std::move(e));
    }
    const uint64_t payload_len = r.u64("payload length");
    if (r.remaining() != payload_len * 8) {
        throw FormatError(path + ": payload length " + std::to_string(r.remaining()) + " bytes at byte " +
                          std::to_string(r.pos()) + ", expected " + std::to_string(payload_len * 8));
    }
    std::vector<double> payload(payload_len);
    for (double& v : payload) v = r.f64("payload");
    r.done("payload");

    auto take = [&](const std::string& name, const std::vector<int64_t>& shape) -> Tensor {
        for (const Entry& e : entries) {
            if (e.name != name) continue;
            if (e.shape != shape) {
                throw FormatError(path + ": parameter '" + name + "' has shape " + shape_str(e.shape) +
                                  ", config implies " + shape_str(shape));
            }
            const int64_t n = shape_numel(shape);
            if (e.offset + static_cast<uint64_t>(n) > payload.size()) {
                throw FormatError(path + ": parameter '" + name + "' offset " + std::to_string(e.offset) +
                                  " overruns payload");
            }
            return Tensor(shape, std::vector<double>(payload.begin() + static_cast<int64_t>(e.offset),
                                                     payload.begin() + static_cast<int64_t>(e.offset) + n));
        }
        throw FormatError(path + ": parameter '" + name + "' missing from table");
    };

    const std::vector<ParamSpec> layout = param_layout(ck.params.config);
    const size_t expected_entries = layout.size() * (has_adam ? 3 : 1);
    if (entries.size() != expected_entries) {
        throw FormatError(path + ": table has " + std::to_string(entries.size()) + " entries, config implies " +
                          std::to_string(expected_entries));
    }
    for (const ParamSpec& spec : layout) {
        ck.params.names.push_back(spec.name);
        ck.params.tensors.push_back(take(spec.name, spec.shape));
    }
    if (has_adam) {
        AdamState adam;
        adam.t = meta_json.at("provenance").at("adam_t").get<int64_t>();
        for (const ParamSpec& spec : layout) adam.m.push_back(take("adam.m." + spec.name, spec.shape));
        for (const ParamSpec& spec : layout) adam.v.push_back(take("adam.v." + spec.name, spec.shape));
        ck.adam = std::move(adam);
    }
    return ck;
}

IdxData read_idx(const std::string& path) {
    Reader r(slurp(path), path);
    const std::string magic_bytes = r.str(4, "magic");
    uint32_t magic = 0;
    for (int b = 0; b < 4; ++b) {
        magic = (magic << 8) | static_cast<unsigned char>(magic_bytes[static_cast<size_t>(b)]);
    }
    if (magic != 0x00000803 && magic != 0x00000801) {
        std::ostringstream os;
        os << path << ": IDX magic mismatch at byte 0: expected 0x00000803 (images) or 0x00000801 (labels), found 0x";
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%08x", magic);
        os << buf;
        throw FormatError(os.str());
    }
    const int rank = static_cast<int>(magic & 0xFF) == 3 ? 3 : 1;
    IdxData data;
    int64_t total = 1;
    for (int d = 0; d < rank; ++d) {
        // IDX dimensions are big-endian u32
        const std::string dim_bytes = r.str(4, "dimension");
        uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v = (v << 8) | static_cast<unsigned char>(dim_bytes[static_cast<size_t>(b)]);
        data.dims.push_back(static_cast<int64_t>(v));
        total *= static_cast<int64_t>(v);
    }
    if (r.remaining() != static_cast<size_t>(total)) {
        throw FormatError(path + ": IDX payload has " + std::to_string(r.remaining()) + " bytes at byte " +
                          std::to_string(r.pos()) + ", dimensions imply " + std::to_string(total));
    }
    const std::string bytes = r.str(static_cast<size_t>(total), "payload");
    data.bytes.assign(bytes.begin(), bytes.end());
    return data;
}

void write_idx(const std::string& path, const std::vector<int64_t>& dims,
               const std::vector<uint8_t>& bytes) {
    if (dims.size() != 1 && dims.size() != 3) {
        throw TdxError("write_idx: only rank-1 (labels) and rank-3 (images) files are supported");
    }
    int64_t total = 1;
    for (int64_t d : dims) total *= d;
    if (total != static_cast<int64_t>(bytes.size())) {
        throw TdxError("write_idx: payload length does not match dimensions");
    }
    std::string out;
    const uint32_t magic = dims.size() == 3 ? 0x00000803u : 0x00000801u;
    for (int b = 3; b >= 0; --b) out.push_back(static_cast<char>((magic >> (8 * b)) & 0xFF));
    for (int64_t d : dims) {
        const uint32_t v = static_cast<uint32_t>(d);
        for (int b = 3; b >= 0; --b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFF));
    }
    out.append(bytes.begin(), bytes.end());
    atomic_write(path, out);
}

std::string inspect_container(const std::string& path) {
    const std::string bytes = slurp(path);
    std::ostringstream os;
    if (bytes.size() >= 4 && (bytes.compare(0, 4, "TDXD") == 0 || bytes.compare(0, 4, "TDXC") == 0)) {
        Reader r(bytes, path);
        const std::string magic = r.str(4, "magic");
        const uint32_t version = r.u32("version");
        const uint64_t json_len = r.u64("metadata length");
        const std::string js = r.str(json_len, "metadata");
        os << path << ": " << (magic == "TDXD" ? "meta-dataset" : "checkpoint") << " container, version "
           << version << "\n";
        os << "metadata: " << json::parse(js).dump(2) << "\n";
        os << "payload: " << r.remaining() << " bytes\n";
        return os.str();
    }
    if (bytes.size() >= 4 && bytes[0] == 0 && bytes[1] == 0 && bytes[2] == 0x08) {
        const IdxData idx = read_idx(path);
        os << path << ": IDX u8 tensor, dims [";
        for (size_t i = 0; i < idx.dims.size(); ++i) os << (i ? ", " : "") << idx.dims[i];
        os << "], " << idx.bytes.size() << " payload bytes\n";
        return os.str();
    }
    throw FormatError(path + ": unrecognized container (no TDXD/TDXC/IDX magic at byte 0)");
}

} // namespace tdx
