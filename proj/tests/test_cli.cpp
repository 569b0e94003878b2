#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "dnahnet/manifest.hpp"
#include "dnahnet/random.hpp"
#include "dnahnet/seqdata.hpp"
#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = DNAHNET_CLI_PATH;
const fs::path kConfigs = fs::path(DNAHNET_SOURCE_DIR) / "configs";

struct Run {
    int code = -1;
    std::string out, err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Runs the CLI inside `dir`.
Run cli(const fs::path& dir, const std::string& args) {
    const std::string cmd = "cd '" + dir.string() + "' && '" + kCli + "' " + args + " > stdout.txt 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(dir / "stdout.txt");
    r.err = slurp(dir / "stderr.txt");
    return r;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("dnahnet_cli_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

// Trains the toy model into dir/toy.ckpt.
void train_toy(const fs::path& dir) {
    fs::copy_file(kConfigs / "toy.ini", dir / "toy.ini", fs::copy_options::overwrite_existing);
    const auto r = cli(dir, "train --config toy.ini");
    REQUIRE(r.code == 0);
}

}  // namespace

TEST_CASE("flops prints one data row per length") {
    TempDir d("flops");
    const auto r = cli(d.path, "flops --config '" + (kConfigs / "toy.ini").string() + "' --lengths 1024");
    CHECK(r.code == 0);
    std::istringstream in(r.out);
    std::string line;
    int data = 0;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("L,total_flops", 0) == 0) {
            header = true;
            continue;
        }
        ++data;
        CHECK(line.rfind("1024,", 0) == 0);
    }
    CHECK(header);
    CHECK(data == 1);
    CHECK(fs::exists(d.path / "dnahnet_flops.manifest.json"));
}

TEST_CASE("usage and data errors use exit codes and the error prefix") {
    TempDir d("errors");
    auto r = cli(d.path, "vep --reference r.fa --variants v.tsv --out out.csv");
    CHECK(r.code == 1);
    CHECK(r.err.rfind("ERROR 1 cli:", 0) == 0);
    CHECK_FALSE(fs::exists(d.path / "out.csv"));

    CHECK(cli(d.path, "").code == 1);
    CHECK(cli(d.path, "flops --config x.ini --lengths 10 --precision f16").code == 1);
    CHECK(cli(d.path, "flops --config '" + (kConfigs / "toy.ini").string() + "' --lengths 10,abc").code == 1);

    r = cli(d.path, "eval --model missing.ckpt --fasta missing.fa");
    CHECK(r.code == 2);
    CHECK(r.err.rfind("ERROR 2 ", 0) == 0);

    write(d.path / "bad.ini", "[model]\ntargets = 0.5, 2\n");
    r = cli(d.path, "flops --config bad.ini --lengths 10");
    CHECK(r.code == 2);
    CHECK(r.err.find("config:") != std::string::npos);
}

TEST_CASE("pipelines run end to end on a toy model") {
    TempDir d("pipelines");
    train_toy(d.path);
    for (const char* f : {"toy.ckpt", "toy.ckpt.cfg", "toy_metrics.csv", "toy.ckpt.manifest.json"}) {
        CHECK(fs::exists(d.path / f));
    }

    write(d.path / "ref.fa", ">geneA\nACGTACGTTGCAACGTAGGCTAGCATCGATCGAT\n>geneB\nTTGACCGATGCAAGTCCG\n");
    write(d.path / "vars.tsv",
          "gene_id\tposition\tref\talt\tfitness\ngeneA\t3\tT\tC\t0.5\ngeneA\t4\tG\tC\t-1\ngeneB\t2\tG\tA\t0.25\n");
    auto r = cli(d.path, "vep --model toy.ckpt --reference ref.fa --variants vars.tsv --out vep.csv");
    CHECK(r.code == 0);
    CHECK(r.out.find("skipped=1") != std::string::npos);
    const auto vep = slurp(d.path / "vep.csv");
    CHECK(std::count(vep.begin(), vep.end(), '\n') == 3);
    CHECK(vep.rfind("gene_id,position,ref,alt,score,fitness\n", 0) == 0);
    const auto manifest = nlohmann::json::parse(slurp(d.path / "vep.csv.manifest.json"));
    CHECK(manifest["subcommand"] == "vep");
    CHECK(manifest["outputs"]["vep.csv"] == dnahnet::sha256_file(d.path / "vep.csv"));
    CHECK(manifest["inputs"].size() == 4);

    std::string genome = ">chr\n";
    dnahnet::Rng rng(5);
    for (int i = 0; i < 300; ++i) genome += dnahnet::seq::kAlphabet[rng() % 4];
    write(d.path / "genome.fa", genome + "\n");
    write(d.path / "genes.tsv",
          "gene_id\tgenome_id\tstart\tend\tstrand\tregion\tessential\n"
          "g1\tchr\t30\t120\t+\tcoding\t1\n"
          "g2\tchr\t150\t240\t-\tcoding\t0\n"
          "p1\tchr\t0\t30\t+\tpromoter\tNA\n"
          "ig\tchr\t240\t300\t+\tintergenic\tNA\n");
    r = cli(d.path, "essentiality --model toy.ckpt --genome genome.fa --genes genes.tsv --out ess.csv");
    CHECK(r.code == 0);
    CHECK(r.out.find("scored=2 skipped=0 auroc=") != std::string::npos);

    r = cli(d.path, "boundaries --model toy.ckpt --genome genome.fa --annotations genes.tsv --out bnd.csv");
    CHECK(r.code == 0);
    CHECK(r.out.find("Global selection rate") != std::string::npos);
    CHECK(slurp(d.path / "bnd.csv").rfind("stage,feature_class,feature,rate,numerator,denominator\n", 0) == 0);
    CHECK(slurp(d.path / "bnd.decisions.csv").rfind("seq_id,stage,position,p,b\n", 0) == 0);

    r = cli(d.path, "eval --model toy.ckpt --fasta genome.fa");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("perplexity,tokens,windows\n", 0) == 0);
    CHECK(r.out.find(",299,1\n") != std::string::npos);

    r = cli(d.path, "--precision f32 eval --model toy.ckpt --fasta genome.fa");
    CHECK(r.code == 0);

    write(d.path / "points.csv", "compute,perplexity\n1e15,3.2\n1e16,3.0\n1e17,2.85\n");
    r = cli(d.path, "fit-scaling --points points.csv");
    CHECK(r.code == 0);
    CHECK(r.out.rfind("A,alpha,residual,n_points\n", 0) == 0);
}

TEST_CASE("identical inputs reproduce identical outputs") {
    TempDir a("repro_a"), b("repro_b");
    train_toy(a.path);
    train_toy(b.path);
    CHECK(slurp(a.path / "toy.ckpt") == slurp(b.path / "toy.ckpt"));
    CHECK(slurp(a.path / "toy_metrics.csv") == slurp(b.path / "toy_metrics.csv"));

    const auto g1 = cli(a.path, "generate --model toy.ckpt --length 40 --prompt ACGTAC --temperature 0");
    const auto g2 = cli(b.path, "generate --model toy.ckpt --length 40 --prompt ACGTAC --temperature 0");
    CHECK(g1.code == 0);
    CHECK(g1.out == g2.out);
    CHECK(g1.out.rfind(">generated seed=0\nACGTAC", 0) == 0);
    CHECK(g1.out.size() == std::string(">generated seed=0\n").size() + 46 + 1);
    const auto s1 = cli(a.path, "generate --model toy.ckpt --length 40 --seed 3");
    const auto s2 = cli(a.path, "generate --model toy.ckpt --length 40 --seed 3");
    CHECK(s1.out == s2.out);

    auto strip_times = [](nlohmann::json j) {
        j.erase("started");
        j.erase("finished");
        return j;
    };
    const auto ma = nlohmann::json::parse(slurp(a.path / "dnahnet_generate.manifest.json"));
    const auto first = cli(b.path, "generate --model toy.ckpt --length 40 --seed 3");
    const auto mb = nlohmann::json::parse(slurp(b.path / "dnahnet_generate.manifest.json"));
    CHECK(strip_times(ma)["outputs"] == strip_times(mb)["outputs"]);
    CHECK(strip_times(ma)["inputs"].size() == 2);
}
