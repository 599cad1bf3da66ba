#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "emev/errors.hpp"
#include "emev/serialize.hpp"

using namespace emev;

namespace {

std::string tmp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() / stem).string();
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct TmpFile {
    std::string path;
    explicit TmpFile(const std::string& stem) : path(tmp_path(stem)) {}
    ~TmpFile() { std::remove(path.c_str()); }
};

Dataset small_dataset() {
    ChannelProfile p = ChannelProfile::builtin("cdl-b-like");
    p.n_rb = 2;
    p.n_t = 4;
    p.n_r = 2;
    return make_dataset(p, 5, 31);
}

}  // namespace

TEST_CASE("dataset write/read/write is byte exact") {
    Dataset ds = small_dataset();
    ds.s_scale = 3.25f;
    TmpFile a("emev_ds_a.bin"), b("emev_ds_b.bin");
    write_dataset(a.path, ds);
    Dataset back = read_dataset(a.path);
    CHECK(back.profile == ds.profile);
    CHECK(back.master_seed == ds.master_seed);
    CHECK(back.s_scale == ds.s_scale);
    CHECK(back.n_rb == ds.n_rb);
    CHECK(back.n_r == ds.n_r);
    CHECK(back.n_t == ds.n_t);
    CHECK(back.h == ds.h);
    CHECK(back.labels == ds.labels);
    write_dataset(b.path, back);
    CHECK(slurp(a.path) == slurp(b.path));
    CHECK(file_checksum(a.path) == file_checksum(b.path));
}

TEST_CASE("make_dataset is deterministic and labeled") {
    ChannelProfile p = ChannelProfile::builtin("cdl-c-like");
    p.n_rb = 2;
    p.n_t = 4;
    p.n_r = 2;
    Dataset a = make_dataset(p, 4, 7);
    Dataset b = make_dataset(p, 4, 7);
    Dataset c = make_dataset(p, 4, 8);
    CHECK(a.h == b.h);
    CHECK(a.h != c.h);
    CHECK(a.n_samples() == 4);
    uint8_t want = static_cast<uint8_t>(ChannelProfile::builtin_label("cdl-c-like"));
    for (uint8_t l : a.labels) CHECK(l == want);
    // samples are mutually distinct
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j) {
            bool same = true;
            for (int64_t k = 0; k < a.sample_floats(); ++k)
                if (a.sample(i)[k] != a.sample(j)[k]) {
                    same = false;
                    break;
                }
            CHECK_FALSE(same);
        }
}

TEST_CASE("mix_datasets concatenates and keeps labels") {
    ChannelProfile pa = ChannelProfile::builtin("cdl-a-like");
    pa.n_rb = 2;
    pa.n_t = 4;
    pa.n_r = 2;
    ChannelProfile pd = ChannelProfile::builtin("cdl-d-like");
    pd.n_rb = 2;
    pd.n_t = 4;
    pd.n_r = 2;
    Dataset a = make_dataset(pa, 3, 1);
    Dataset d = make_dataset(pd, 2, 2);
    Dataset m = mix_datasets({a, d});
    CHECK(m.n_samples() == 5);
    CHECK(m.labels[0] == a.labels[0]);
    CHECK(m.labels[4] == d.labels[1]);
    CHECK(std::equal(a.h.begin(), a.h.end(), m.h.begin()));

    ChannelProfile bad = pa;
    bad.n_t = 8;
    Dataset wrong = make_dataset(bad, 1, 3);
    CHECK_THROWS_AS(mix_datasets({a, wrong}), DimensionError);
    CHECK_THROWS_AS(mix_datasets({}), ConfigError);
}

TEST_CASE("dataset reader rejects bad magic and truncation") {
    Dataset ds = small_dataset();
    TmpFile f("emev_ds_bad.bin");
    write_dataset(f.path, ds);
    std::vector<char> bytes = slurp(f.path);

    {
        std::ofstream out(f.path, std::ios::binary);
        std::vector<char> mangled = bytes;
        mangled[0] = 'X';
        out.write(mangled.data(), static_cast<std::streamsize>(mangled.size()));
    }
    CHECK_THROWS_AS(read_dataset(f.path), IoError);

    {
        std::ofstream out(f.path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 7));
    }
    CHECK_THROWS_AS(read_dataset(f.path), IoError);

    CHECK_THROWS_AS(read_dataset(tmp_path("emev_no_such_file.bin")), IoError);
}

TEST_CASE("checkpoint write/read/write is byte exact") {
    Checkpoint ck;
    ck.config["kind"] = "N_sp";
    ck.config["profile"] = "cdl-a-like";
    ck.config["adam.lr"] = "0.001";
    ck.params.push_back({"enc.fc.w", Tensor({2, 3}, {1, 2, 3, 4, 5, 6})});
    ck.params.push_back({"enc.fc.b", Tensor({3}, {-1, 0, 1})});
    ck.opt_state.push_back({"adam.m.enc.fc.b", Tensor({3}, {0.5f, 0.25f, 0.125f})});
    TmpFile a("emev_ck_a.bin"), b("emev_ck_b.bin");
    write_checkpoint(a.path, ck);
    Checkpoint back = read_checkpoint(a.path);
    CHECK(back.config == ck.config);
    REQUIRE(back.params.size() == 2);
    CHECK(back.params[0].name == "enc.fc.w");
    CHECK(back.params[0].tensor.shape == std::vector<int64_t>{2, 3});
    CHECK(back.params[0].tensor.data == ck.params[0].tensor.data);
    REQUIRE(back.opt_state.size() == 1);
    CHECK(back.opt_state[0].name == "adam.m.enc.fc.b");
    CHECK(back.opt_state[0].tensor.data == ck.opt_state[0].tensor.data);
    write_checkpoint(b.path, back);
    CHECK(slurp(a.path) == slurp(b.path));
}

TEST_CASE("checkpoint with no optimizer section round trips") {
    Checkpoint ck;
    ck.config["kind"] = "N_csi";
    ck.params.push_back({"w", Tensor({1}, {42.0f})});
    TmpFile f("emev_ck_noopt.bin");
    write_checkpoint(f.path, ck);
    Checkpoint back = read_checkpoint(f.path);
    CHECK(back.opt_state.empty());
    CHECK(back.params.size() == 1);
    CHECK(back.config.at("kind") == "N_csi");
}

TEST_CASE("checkpoint reader rejects bad magic and truncation") {
    Checkpoint ck;
    ck.config["k"] = "v";
    ck.params.push_back({"w", Tensor({2}, {1.0f, 2.0f})});
    TmpFile f("emev_ck_bad.bin");
    write_checkpoint(f.path, ck);
    std::vector<char> bytes = slurp(f.path);
    {
        std::ofstream out(f.path, std::ios::binary);
        std::vector<char> mangled = bytes;
        mangled[2] = 'Z';
        out.write(mangled.data(), static_cast<std::streamsize>(mangled.size()));
    }
    CHECK_THROWS_AS(read_checkpoint(f.path), IoError);
    {
        std::ofstream out(f.path, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 5));
    }
    CHECK_THROWS_AS(read_checkpoint(f.path), IoError);
}

TEST_CASE("file checksum changes when a byte changes") {
    TmpFile f("emev_sum.bin");
    {
        std::ofstream out(f.path, std::ios::binary);
        out << "hello world";
    }
    uint64_t a = file_checksum(f.path);
    {
        std::ofstream out(f.path, std::ios::binary);
        out << "hello worle";  // one byte differs
    }
    CHECK(file_checksum(f.path) != a);
    CHECK_THROWS_AS(file_checksum(tmp_path("emev_no_such_sum.bin")), IoError);
}
