#include "emev/serialize.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "emev/errors.hpp"
#include "emev/rng.hpp"

namespace emev {

namespace {

constexpr char kDatasetMagic[8] = {'E', 'M', 'E', 'V', 'D', 'S', '0', '1'};
constexpr char kCheckpointMagic[8] = {'E', 'M', 'E', 'V', 'C', 'K', '0', '1'};
constexpr uint32_t kFormatVersion = 1;

// All multi-byte fields are little-endian; this code assumes a little-endian
// host (asserted at startup of the CLI).
template <typename T>
void write_pod(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is, const std::string& path) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("truncated file: " + path);
    return v;
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is, const std::string& path) {
    uint32_t n = read_pod<uint32_t>(is, path);
    std::string s(n, '\0');
    is.read(s.data(), static_cast<std::streamsize>(n));
    if (!is) throw IoError("truncated file: " + path);
    return s;
}

void check_magic(std::istream& is, const char* magic, const std::string& path) {
    char buf[8];
    is.read(buf, 8);
    if (!is || std::memcmp(buf, magic, 8) != 0) {
        throw IoError("bad magic in " + path);
    }
    uint32_t version = read_pod<uint32_t>(is, path);
    if (version != kFormatVersion) {
        throw IoError("unsupported format version " + std::to_string(version) + " in " + path);
    }
}

void write_named_tensors(std::ostream& os, const std::vector<NamedTensor>& ts) {
    write_pod<uint32_t>(os, static_cast<uint32_t>(ts.size()));
    for (const NamedTensor& nt : ts) {
        write_string(os, nt.name);
        write_pod<uint32_t>(os, static_cast<uint32_t>(nt.tensor.rank()));
        for (int64_t d : nt.tensor.shape) write_pod<uint32_t>(os, static_cast<uint32_t>(d));
        os.write(reinterpret_cast<const char*>(nt.tensor.data.data()),
                 static_cast<std::streamsize>(nt.tensor.data.size() * sizeof(float)));
    }
}

std::vector<NamedTensor> read_named_tensors(std::istream& is, const std::string& path) {
    uint32_t count = read_pod<uint32_t>(is, path);
    std::vector<NamedTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        NamedTensor nt;
        nt.name = read_string(is, path);
        uint32_t rank = read_pod<uint32_t>(is, path);
        std::vector<int64_t> shape(rank);
        for (uint32_t r = 0; r < rank; ++r) shape[r] = read_pod<uint32_t>(is, path);
        int64_t n = shape_product(shape);
        std::vector<float> data(static_cast<size_t>(n));
        is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n * sizeof(float)));
        if (!is) throw IoError("truncated tensor '" + nt.name + "' in " + path);
        nt.tensor = Tensor(std::move(shape), std::move(data));
        out.push_back(std::move(nt));
    }
    return out;
}

std::string config_to_blob(const std::map<std::string, std::string>& cfg) {
    std::ostringstream os;
    for (const auto& [k, v] : cfg) os << k << "=" << v << "\n";
    return os.str();
}

std::map<std::string, std::string> blob_to_config(const std::string& blob, const std::string& path) {
    std::map<std::string, std::string> cfg;
    std::istringstream is(blob);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos) throw IoError("malformed config line in " + path + ": " + line);
        cfg[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return cfg;
}

}  // namespace

ChannelTensor Dataset::sample_tensor(int i) const {
    ChannelTensor ct;
    ct.n_rb = n_rb;
    ct.n_r = n_r;
    ct.n_t = n_t;
    ct.h.resize(static_cast<size_t>(n_rb) * n_r * n_t);
    const float* p = sample(i);
    for (size_t k = 0; k < ct.h.size(); ++k) {
        ct.h[k] = cd(static_cast<double>(p[2 * k]), static_cast<double>(p[2 * k + 1]));
    }
    return ct;
}

void Dataset::append_sample(const ChannelTensor& ct, uint8_t label) {
    if (ct.n_rb != n_rb || ct.n_r != n_r || ct.n_t != n_t) {
        throw DimensionError("append_sample: tensor dims do not match dataset");
    }
    for (const cd& v : ct.h) {
        h.push_back(static_cast<float>(v.real()));
        h.push_back(static_cast<float>(v.imag()));
    }
    labels.push_back(label);
}

void write_dataset(const std::string& path, const Dataset& ds) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kDatasetMagic, 8);
    write_pod<uint32_t>(os, kFormatVersion);
    write_pod<uint32_t>(os, static_cast<uint32_t>(ds.n_samples()));
    write_pod<uint32_t>(os, static_cast<uint32_t>(ds.n_rb));
    write_pod<uint32_t>(os, static_cast<uint32_t>(ds.n_r));
    write_pod<uint32_t>(os, static_cast<uint32_t>(ds.n_t));
    write_string(os, ds.profile);
    write_pod<uint64_t>(os, ds.master_seed);
    write_pod<float>(os, ds.s_scale);
    os.write(reinterpret_cast<const char*>(ds.h.data()),
             static_cast<std::streamsize>(ds.h.size() * sizeof(float)));
    os.write(reinterpret_cast<const char*>(ds.labels.data()),
             static_cast<std::streamsize>(ds.labels.size()));
    if (!os) throw IoError("write failed: " + path);
}

Dataset read_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    check_magic(is, kDatasetMagic, path);
    Dataset ds;
    uint32_t n_samples = read_pod<uint32_t>(is, path);
    ds.n_rb = static_cast<int>(read_pod<uint32_t>(is, path));
    ds.n_r = static_cast<int>(read_pod<uint32_t>(is, path));
    ds.n_t = static_cast<int>(read_pod<uint32_t>(is, path));
    ds.profile = read_string(is, path);
    ds.master_seed = read_pod<uint64_t>(is, path);
    ds.s_scale = read_pod<float>(is, path);
    int64_t floats = static_cast<int64_t>(n_samples) * ds.n_rb * ds.n_r * ds.n_t * 2;
    ds.h.resize(static_cast<size_t>(floats));
    is.read(reinterpret_cast<char*>(ds.h.data()), static_cast<std::streamsize>(floats * sizeof(float)));
    ds.labels.resize(n_samples);
    is.read(reinterpret_cast<char*>(ds.labels.data()), static_cast<std::streamsize>(n_samples));
    if (!is) throw IoError("truncated dataset: " + path);
    return ds;
}

Dataset make_dataset(const ChannelProfile& profile, int count, uint64_t seed) {
    if (count < 1) throw ConfigError("make_dataset: count must be >= 1");
    profile.validate();
    Dataset ds;
    ds.profile = profile.name;
    ds.master_seed = seed;
    ds.n_rb = profile.n_rb;
    ds.n_r = profile.n_r;
    ds.n_t = profile.n_t;
    ds.h.reserve(static_cast<size_t>(count) * ds.sample_floats());
    uint8_t label = 0;
    try {
        label = static_cast<uint8_t>(ChannelProfile::builtin_label(profile.name));
    } catch (const ConfigError&) {
        label = 255;  // custom profile
    }
    for (int i = 0; i < count; ++i) {
        ChannelTensor ct = generate_channel(profile, Rng::derive(seed, static_cast<uint64_t>(i)));
        ds.append_sample(ct, label);
    }
    return ds;
}

Dataset mix_datasets(const std::vector<Dataset>& parts) {
    if (parts.empty()) throw ConfigError("mix_datasets: no inputs");
    Dataset out;
    out.profile = "mix";
    out.master_seed = parts[0].master_seed;
    out.n_rb = parts[0].n_rb;
    out.n_r = parts[0].n_r;
    out.n_t = parts[0].n_t;
    for (const Dataset& p : parts) {
        if (p.n_rb != out.n_rb || p.n_r != out.n_r || p.n_t != out.n_t) {
            throw DimensionError("mix_datasets: dimension mismatch across inputs");
        }
        out.h.insert(out.h.end(), p.h.begin(), p.h.end());
        out.labels.insert(out.labels.end(), p.labels.begin(), p.labels.end());
    }
    return out;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    os.write(kCheckpointMagic, 8);
    write_pod<uint32_t>(os, kFormatVersion);
    write_string(os, config_to_blob(ck.config));
    write_named_tensors(os, ck.params);
    write_named_tensors(os, ck.opt_state);
    if (!os) throw IoError("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    check_magic(is, kCheckpointMagic, path);
    Checkpoint ck;
    ck.config = blob_to_config(read_string(is, path), path);
    ck.params = read_named_tensors(is, path);
    // Optimizer section is optional; absent section means none.
    if (is.peek() == std::char_traits<char>::eof()) return ck;
    ck.opt_state = read_named_tensors(is, path);
    return ck;
}

uint64_t file_checksum(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open: " + path);
    uint64_t hash = 0xcbf29ce484222325ull;
    char buf[4096];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            hash ^= static_cast<uint8_t>(buf[i]);
            hash *= 0x100000001b3ull;
        }
        if (!is) break;
    }
    return hash;
}

}  // namespace emev
