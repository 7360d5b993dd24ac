#include "ndm/checkpoint.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace ndm {

namespace {

constexpr char kMagic[4] = {'N', 'D', 'M', '1'};
constexpr uint32_t kVersion = 1;

size_t dtype_size(const std::string& dtype) {
    if (dtype == "f4") return 4;
    if (dtype == "f8") return 8;
    throw std::invalid_argument("checkpoint: unknown dtype " + dtype);
}

size_t align8(size_t n) { return (n + 7) & ~size_t{7}; }

}  // namespace

int64_t NamedArray::count() const {
    int64_t n = 1;
    for (int64_t s : shape) n *= s;
    return n;
}

const NamedArray& Checkpoint::array(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return a;
    }
    throw std::runtime_error("checkpoint: missing array " + name);
}

bool Checkpoint::has(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return true;
    }
    return false;
}

NamedArray& Checkpoint::add(const std::string& name, const std::string& dtype,
                            std::vector<int64_t> shape) {
    NamedArray a;
    a.name = name;
    a.dtype = dtype;
    a.shape = std::move(shape);
    a.data.resize(a.count());
    arrays.push_back(std::move(a));
    return arrays.back();
}

void Checkpoint::add_matrix(const std::string& name, const Eigen::MatrixXd& m,
                            const std::string& dtype) {
    NamedArray& a = add(name, dtype, {m.rows(), m.cols()});
    int64_t k = 0;
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            a.data[k++] = m(r, c);
        }
    }
}

void Checkpoint::add_vector(const std::string& name, const Eigen::VectorXd& v,
                            const std::string& dtype) {
    NamedArray& a = add(name, dtype, {v.size()});
    for (int64_t i = 0; i < v.size(); ++i) a.data[i] = v[i];
}

Eigen::MatrixXd Checkpoint::matrix(const std::string& name) const {
    const NamedArray& a = array(name);
    if (a.shape.size() != 2) throw std::runtime_error("checkpoint: " + name + " is not 2-d");
    Eigen::MatrixXd m(a.shape[0], a.shape[1]);
    int64_t k = 0;
    for (int r = 0; r < m.rows(); ++r) {
        for (int c = 0; c < m.cols(); ++c) {
            m(r, c) = a.data[k++];
        }
    }
    return m;
}

Eigen::VectorXd Checkpoint::vector(const std::string& name) const {
    const NamedArray& a = array(name);
    if (a.shape.size() != 1) throw std::runtime_error("checkpoint: " + name + " is not 1-d");
    Eigen::VectorXd v(a.shape[0]);
    for (int64_t i = 0; i < v.size(); ++i) v[i] = a.data[i];
    return v;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    json header = ck.header;
    json meta = json::array();
    size_t offset = 0;
    for (const auto& a : ck.arrays) {
        offset = align8(offset);
        json m;
        m["name"] = a.name;
        m["dtype"] = a.dtype;
        m["shape"] = a.shape;
        m["offset"] = offset;
        m["nbytes"] = a.count() * dtype_size(a.dtype);
        meta.push_back(m);
        offset += a.count() * dtype_size(a.dtype);
    }
    header["arrays"] = meta;
    const std::string header_str = header.dump();

    std::string payload(offset, '\0');
    size_t at = 0;
    for (const auto& a : ck.arrays) {
        at = align8(at);
        if (a.dtype == "f4") {
            for (double v : a.data) {
                const float f = static_cast<float>(v);
                std::memcpy(payload.data() + at, &f, 4);
                at += 4;
            }
        } else {
            for (double v : a.data) {
                std::memcpy(payload.data() + at, &v, 8);
                at += 8;
            }
        }
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp);
        out.write(kMagic, 4);
        const uint32_t version = kVersion;
        out.write(reinterpret_cast<const char*>(&version), 4);
        const uint64_t hlen = header_str.size();
        out.write(reinterpret_cast<const char*>(&hlen), 8);
        out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path);
    char magic[4];
    in.read(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw std::runtime_error("not a checkpoint file: " + path);
    }
    uint32_t version = 0;
    in.read(reinterpret_cast<char*>(&version), 4);
    if (version != kVersion) {
        throw std::runtime_error("unsupported checkpoint version in " + path);
    }
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 8);
    std::string header_str(hlen, '\0');
    in.read(header_str.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("truncated checkpoint header: " + path);

    Checkpoint ck;
    ck.header = json::parse(header_str);
    std::string payload((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());

    for (const auto& m : ck.header.at("arrays")) {
        NamedArray a;
        a.name = m.at("name").get<std::string>();
        a.dtype = m.at("dtype").get<std::string>();
        a.shape = m.at("shape").get<std::vector<int64_t>>();
        const size_t offset = m.at("offset").get<size_t>();
        const size_t nbytes = m.at("nbytes").get<size_t>();
        if (offset + nbytes > payload.size()) {
            throw std::runtime_error("checkpoint payload truncated: " + path);
        }
        if (nbytes != static_cast<size_t>(a.count()) * dtype_size(a.dtype)) {
            throw std::runtime_error("checkpoint shape/bytes mismatch for " + a.name);
        }
        a.data.resize(a.count());
        if (a.dtype == "f4") {
            for (int64_t i = 0; i < a.count(); ++i) {
                float f;
                std::memcpy(&f, payload.data() + offset + i * 4, 4);
                a.data[i] = f;
            }
        } else {
            for (int64_t i = 0; i < a.count(); ++i) {
                std::memcpy(&a.data[i], payload.data() + offset + i * 8, 8);
            }
        }
        ck.arrays.push_back(std::move(a));
    }
    ck.header.erase("arrays");
    return ck;
}

namespace {

void put_encoder(Checkpoint& ck, const EncoderModel& enc, json& header) {
    json meta;
    meta["image_h"] = enc.image_h;
    meta["image_w"] = enc.image_w;
    meta["d"] = enc.d;
    meta["fit_seed"] = enc.fit_seed;
    meta["fitted"] = enc.fitted;
    json scales = json::array();
    for (const auto& s : enc.scales) {
        json sj;
        sj["M"] = s.patches_per_side;
        sj["feature_scale"] = s.feature_scale;
        scales.push_back(sj);
        const std::string prefix = "enc.scale" + std::to_string(s.patches_per_side);
        ck.add_vector(prefix + ".mean", s.mean, "f8");
        ck.add_matrix(prefix + ".basis", s.basis, "f8");
    }
    meta["scales"] = scales;
    header["encoder"] = meta;
}

EncoderModel get_encoder(const Checkpoint& ck) {
    const json& meta = ck.header.at("encoder");
    EncoderModel enc;
    enc.image_h = meta.at("image_h").get<int>();
    enc.image_w = meta.at("image_w").get<int>();
    enc.d = meta.at("d").get<int>();
    enc.fit_seed = meta.at("fit_seed").get<uint64_t>();
    enc.fitted = meta.at("fitted").get<bool>();
    for (const auto& sj : meta.at("scales")) {
        ScaleProjection s;
        s.patches_per_side = sj.at("M").get<int>();
        s.feature_scale = sj.at("feature_scale").get<double>();
        const std::string prefix = "enc.scale" + std::to_string(s.patches_per_side);
        s.mean = ck.vector(prefix + ".mean");
        s.basis = ck.matrix(prefix + ".basis");
        enc.scales.push_back(std::move(s));
    }
    return enc;
}

json gamma_to_json(double g) {
    if (std::isinf(g)) return "inf";
    return g;
}

}  // namespace

Checkpoint bundle_to_checkpoint(const ModelBundle& bundle) {
    Checkpoint ck;
    ck.header["kind"] = "bundle";
    ck.header["config"] = bundle.config.to_json();
    json clips = json::array();
    for (int l = 1; l <= bundle.levels(); ++l) {
        const double c = bundle.z0_clip[l];
        clips.push_back(std::isfinite(c) ? json(c) : json(nullptr));
    }
    ck.header["z0_clip"] = clips;
    put_encoder(ck, bundle.encoder, ck.header);

    ck.add_vector("sched.alpha", bundle.schedule.alpha, "f8");
    ck.add_vector("sched.beta", bundle.schedule.beta, "f8");

    json nets = json::array();
    for (int l = 1; l <= bundle.levels(); ++l) {
        const DenoiserNet& net = bundle.nets[l];
        json nj;
        nj["level"] = net.level;
        nj["input_dim"] = net.input_dim;
        nj["cond_dim"] = net.cond_dim;
        nj["time_dim"] = net.time_dim;
        nj["hidden"] = net.hidden;
        nets.push_back(nj);
        const std::string prefix = "net" + std::to_string(l);
        for (int k = 0; k < net.n_layers(); ++k) {
            ck.add_matrix(prefix + ".W" + std::to_string(k), net.W[k]);
            ck.add_vector(prefix + ".b" + std::to_string(k), net.b[k]);
        }
        if (net.cond_dim > 0) {
            ck.add_vector(prefix + ".null_token", net.null_token);
        }
    }
    ck.header["nets"] = nets;
    return ck;
}

ModelBundle bundle_from_checkpoint(const Checkpoint& ck) {
    if (ck.header.value("kind", "") != "bundle") {
        throw std::runtime_error("checkpoint is not a model bundle");
    }
    ModelBundle b;
    b.config = NestedConfig::from_json(ck.header.at("config"));
    b.encoder = get_encoder(ck);
    b.z0_clip.assign(b.config.levels + 1, std::numeric_limits<double>::infinity());
    if (ck.header.contains("z0_clip")) {
        int cl = 1;
        for (const auto& c : ck.header.at("z0_clip")) {
            if (!c.is_null()) b.z0_clip[cl] = c.get<double>();
            ++cl;
        }
    }
    b.schedule.T = b.config.T;
    b.schedule.kind = b.config.schedule;
    b.schedule.alpha = ck.vector("sched.alpha");
    b.schedule.beta = ck.vector("sched.beta");

    b.nets.resize(b.config.levels + 1);
    int l = 1;
    for (const auto& nj : ck.header.at("nets")) {
        DenoiserNet net;
        net.level = nj.at("level").get<int>();
        net.input_dim = nj.at("input_dim").get<int>();
        net.cond_dim = nj.at("cond_dim").get<int>();
        net.time_dim = nj.at("time_dim").get<int>();
        net.hidden = nj.at("hidden").get<std::vector<int>>();
        const std::string prefix = "net" + std::to_string(l);
        for (size_t k = 0; k <= net.hidden.size(); ++k) {
            net.W.push_back(ck.matrix(prefix + ".W" + std::to_string(k)));
            net.b.push_back(ck.vector(prefix + ".b" + std::to_string(k)));
        }
        if (net.cond_dim > 0) {
            net.null_token = ck.vector(prefix + ".null_token");
        } else {
            net.null_token = Eigen::VectorXd::Zero(0);
        }
        b.nets[l] = std::move(net);
        ++l;
    }
    if (l != b.config.levels + 1) {
        throw std::runtime_error("checkpoint net count mismatch");
    }
    return b;
}

Checkpoint trace_to_checkpoint(const SampleTrace& trace) {
    Checkpoint ck;
    ck.header["kind"] = "trace";
    ck.header["L"] = trace.L;
    ck.header["height"] = trace.height;
    ck.header["width"] = trace.width;
    ck.header["gamma"] = gamma_to_json(trace.gamma);
    ck.header["cfg_weights"] = trace.cfg_weights;
    ck.header["level_seeds"] = trace.level_seeds;
    ck.header["inherited"] = trace.inherited;
    for (int l = 1; l <= trace.L; ++l) {
        ck.add_vector("trace.z" + std::to_string(l), trace.z[l], "f8");
        for (size_t m = 0; m < trace.cond_noise[l].size(); ++m) {
            ck.add_vector("trace.condnoise" + std::to_string(l) + "." + std::to_string(m),
                          trace.cond_noise[l][m], "f8");
        }
    }
    return ck;
}

SampleTrace trace_from_checkpoint(const Checkpoint& ck) {
    if (ck.header.value("kind", "") != "trace") {
        throw std::runtime_error("checkpoint is not a sample trace");
    }
    SampleTrace t;
    t.L = ck.header.at("L").get<int>();
    t.height = ck.header.at("height").get<int>();
    t.width = ck.header.at("width").get<int>();
    if (ck.header.at("gamma").is_string()) {
        t.gamma = std::numeric_limits<double>::infinity();
    } else {
        t.gamma = ck.header.at("gamma").get<double>();
    }
    t.cfg_weights = ck.header.at("cfg_weights").get<std::vector<double>>();
    t.level_seeds = ck.header.at("level_seeds").get<std::vector<uint64_t>>();
    t.inherited = ck.header.at("inherited").get<std::vector<uint8_t>>();
    t.z.resize(t.L + 1);
    t.cond_noise.resize(t.L + 1);
    for (int l = 1; l <= t.L; ++l) {
        t.z[l] = ck.vector("trace.z" + std::to_string(l));
        for (size_t m = 0;; ++m) {
            const std::string name =
                "trace.condnoise" + std::to_string(l) + "." + std::to_string(m);
            if (!ck.has(name)) break;
            t.cond_noise[l].push_back(ck.vector(name));
        }
    }
    return t;
}

Checkpoint encoder_to_checkpoint(const EncoderModel& enc) {
    Checkpoint ck;
    ck.header["kind"] = "encoder";
    put_encoder(ck, enc, ck.header);
    return ck;
}

EncoderModel encoder_from_checkpoint(const Checkpoint& ck) {
    const std::string kind = ck.header.value("kind", "");
    if (kind != "encoder" && kind != "bundle") {
        throw std::runtime_error("checkpoint holds no encoder");
    }
    return get_encoder(ck);
}

}  // namespace ndm
