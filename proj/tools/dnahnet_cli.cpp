// Command-line front end. Data goes to files or stdout, diagnostics to
// stderr; every failure is one `ERROR <code> <module>: ...` line.

#include <omp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dnahnet/errors.hpp"
#include "dnahnet/eval.hpp"
#include "dnahnet/flops.hpp"
#include "dnahnet/hnet.hpp"
#include "dnahnet/io.hpp"
#include "dnahnet/manifest.hpp"
#include "dnahnet/train.hpp"

namespace fs = std::filesystem;
using namespace dnahnet;

namespace {

struct Globals {
    int threads = 0;
    std::string precision = "f64";
};

RunManifest start_manifest(const std::string& sub, const Globals& g, std::map<std::string, std::string> args) {
    RunManifest m;
    m.subcommand = sub;
    m.arguments = std::move(args);
    m.precision = g.precision;
    m.started = utc_timestamp();
    return m;
}

// Stdout-only subcommands record their output digest in a manifest in the
// working directory.
void finish_stdout(RunManifest m, const std::string& text) {
    std::cout << text << std::flush;
    m.outputs["<stdout>"] = sha256_hex(text);
    const std::string path = "dnahnet_" + m.subcommand + ".manifest.json";
    write_manifest(path, std::move(m));
}

std::unique_ptr<HNetModel> open_model(const std::string& path, const Globals& g, RunManifest& m) {
    RunConfig run;
    auto model = load_model(path, &run);
    if (g.precision == "f32") model->import_parameters(model->export_parameters(ad::DType::f32));
    m.add_input(path);
    m.add_input(config_path_for(path));
    m.config = format_config(run);
    m.seed = run.train.seed;
    return model;
}

std::vector<seq::NucleotideSequence> read_genome(const std::string& path, RunManifest& m) {
    auto records = seq::read_fasta(path);
    m.add_input(path);
    return records;
}

std::size_t window_for(const HNetModel& model) { return std::min(seq::kDefaultWindow, model.config().context); }

void print_skips(const std::vector<eval::Skipped>& skipped) {
    for (const auto& s : skipped) std::cerr << "skipped " << s.id << ": " << s.reason << "\n";
}

std::vector<double> parse_lengths(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (ec != std::errc() || ptr != item.data() + item.size() || !(v >= 1)) {
            throw Error(ErrorKind::usage, "cli", "bad length '" + item + "' in --lengths");
        }
        out.push_back(v);
    }
    if (out.empty()) throw Error(ErrorKind::usage, "cli", "--lengths is empty");
    return out;
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
    if (p.empty()) return {};
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

int cmd_train(const Globals& g, const std::string& config_path) {
    auto m = start_manifest("train", g, {{"config", config_path}});
    RunConfig run = read_config(config_path);
    m.add_input(config_path);
    const fs::path dir = fs::path(config_path).parent_path();
    run.data.train_fasta = resolve(dir, run.data.train_fasta).string();
    run.data.eval_fasta = resolve(dir, run.data.eval_fasta).string();
    if (!run.data.train_fasta.empty()) m.add_input(run.data.train_fasta);
    const fs::path ckpt = resolve(dir, run.data.checkpoint);
    const fs::path metrics = resolve(dir, run.data.metrics);

    HNetModel model(run.model);
    train::Trainer trainer(model, run.train, train::load_corpus(run.data));
    train::FitOptions options;
    options.checkpoint = ckpt;
    options.metrics = metrics;
    options.run = run;
    options.dtype = g.precision == "f32" ? ad::DType::f32 : ad::DType::f64;
    options.on_log = [](const train::StepMetrics& s) {
        std::cerr << "step " << s.step << " lr " << fmt9(s.lr) << " nll " << fmt9(s.nll);
        for (std::size_t i = 0; i < s.F.size(); ++i) std::cerr << " F_s" << i + 1 << " " << fmt9(s.F[i]);
        for (const auto& w : s.warnings) std::cerr << " WARNING " << w;
        std::cerr << "\n";
    };
    const auto result = train::fit(trainer, options);
    if (!run.data.eval_fasta.empty() || run.data.train_fasta.empty()) {
        const auto heldout = train::load_corpus(run.data, true);
        std::cout << "heldout_perplexity," << fmt9(eval::eval_perplexity(model, heldout)) << "\n";
    }
    std::cout << "steps," << trainer.step() << "\nrouting_warnings," << result.warnings << "\n";
    m.config = format_config(run);
    m.seed = run.train.seed;
    m.add_output(ckpt);
    m.add_output(config_path_for(ckpt));
    m.add_output(metrics);
    write_manifest(manifest_path_for(ckpt), std::move(m));
    return 0;
}

int cmd_eval(const Globals& g, const std::string& model_path, const std::string& fasta) {
    auto m = start_manifest("eval", g, {{"model", model_path}, {"fasta", fasta}});
    auto model = open_model(model_path, g, m);
    std::vector<std::vector<seq::Code>> windows;
    for (const auto& rec : read_genome(fasta, m)) {
        for (auto& w : seq::window_genome(rec, window_for(*model))) windows.push_back(std::move(w.codes));
    }
    std::size_t tokens = 0;
    for (const auto& w : windows) tokens += w.size() > 1 ? w.size() - 1 : 0;
    const double ppl = eval::eval_perplexity(*model, windows);
    finish_stdout(std::move(m), "perplexity,tokens,windows\n" + fmt9(ppl) + "," + std::to_string(tokens) + "," +
                                    std::to_string(windows.size()) + "\n");
    return 0;
}

int cmd_generate(const Globals& g, const std::string& model_path, std::size_t length, const std::string& prompt,
                 double temperature, std::uint64_t seed) {
    auto m = start_manifest("generate", g,
                            {{"model", model_path},
                             {"length", std::to_string(length)},
                             {"prompt", prompt},
                             {"temperature", fmt9(temperature)}});
    if (temperature < 0) throw Error(ErrorKind::usage, "cli", "--temperature must be >= 0");
    auto model = open_model(model_path, g, m);
    m.seed = seed;
    const auto codes = seq::encode_sequence(prompt).codes;
    const auto out = model->generate(codes, length, temperature, seed);
    finish_stdout(std::move(m), ">generated seed=" + std::to_string(seed) + "\n" + seq::decode(out) + "\n");
    return 0;
}

int cmd_vep(const Globals& g, const std::string& model_path, const std::string& reference,
            const std::string& variants, const fs::path& out) {
    auto m = start_manifest("vep", g, {{"model", model_path}, {"reference", reference}, {"variants", variants}});
    auto model = open_model(model_path, g, m);
    const auto refs = read_genome(reference, m);
    const auto vars = seq::read_variants(variants);
    m.add_input(variants);
    const auto result = eval::vep_score(*model, refs, vars);
    print_skips(result.skipped);
    write_file_atomic(out, eval::format_vep(result));
    std::cout << "scored=" << result.scored.size() << " skipped=" << result.skipped.size();
    if (result.scored.size() >= 2) {
        std::vector<double> s, f;
        for (const auto& r : result.scored) s.push_back(r.score), f.push_back(r.variant.fitness);
        try {
            std::cout << " spearman=" << fmt9(eval::spearman(s, f));
        } catch (const DegenerateError& e) {
            std::cerr << "spearman undefined: " << e.what() << "\n";
        }
    }
    std::cout << "\n";
    m.add_output(out);
    write_manifest(manifest_path_for(out), std::move(m));
    return 0;
}

int cmd_essentiality(const Globals& g, const std::string& model_path, const std::string& genome,
                     const std::string& genes, const fs::path& out) {
    auto m = start_manifest("essentiality", g, {{"model", model_path}, {"genome", genome}, {"genes", genes}});
    auto model = open_model(model_path, g, m);
    const auto genomes = read_genome(genome, m);
    const auto annotations = seq::read_annotations(genes);
    m.add_input(genes);
    for (const auto& issue : seq::validate_annotations(annotations)) std::cerr << "annotation: " << issue << "\n";
    const auto result = eval::essentiality_scores(*model, genomes, annotations, window_for(*model));
    print_skips(result.skipped);
    write_file_atomic(out, eval::format_essentiality(result));
    std::cout << "scored=" << result.scored.size() << " skipped=" << result.skipped.size();
    std::vector<double> s;
    std::vector<bool> l;
    for (const auto& r : result.scored) {
        if (r.essential) s.push_back(r.score), l.push_back(*r.essential);
    }
    try {
        std::cout << " auroc=" << fmt9(eval::auroc(s, l));
    } catch (const DegenerateError&) {
        std::cerr << "auroc undefined: labelled genes of both classes are required\n";
    }
    std::cout << "\n";
    m.add_output(out);
    write_manifest(manifest_path_for(out), std::move(m));
    return 0;
}

int cmd_boundaries(const Globals& g, const std::string& model_path, const std::string& genome,
                   const std::string& annotations_path, const fs::path& out) {
    auto m = start_manifest("boundaries", g,
                            {{"model", model_path}, {"genome", genome}, {"annotations", annotations_path}});
    auto model = open_model(model_path, g, m);
    const auto annotations = seq::read_annotations(annotations_path);
    m.add_input(annotations_path);
    std::vector<eval::WindowDecisions> decisions;
    std::string dump = std::string(eval::kBoundaryDumpHeader) + "\n";
    {
        ad::NoGradGuard guard;
        for (const auto& rec : read_genome(genome, m)) {
            for (const auto& w : seq::window_genome(rec, window_for(*model))) {
                const auto trace = model->forward(w.codes);
                const std::string id = w.id.empty() ? rec.id : w.id;
                dump += eval::format_boundary_dump(id, trace);
                decisions.push_back(eval::decisions_of(trace, w.origin.value_or(seq::Origin{rec.id, 0, {}})));
            }
        }
    }
    const auto stats = eval::boundary_stats(decisions, annotations);
    std::size_t uncovered = 0;
    for (const auto& s : stats) uncovered += s.uncovered;
    if (uncovered) std::cerr << "positions without annotation (excluded): " << uncovered << "\n";
    fs::path dump_path = out;
    dump_path.replace_extension(".decisions.csv");
    write_file_atomic(out, eval::format_boundary_stats(stats));
    write_file_atomic(dump_path, dump);
    std::cout << eval::render_boundary_table(stats);
    m.add_output(out);
    m.add_output(dump_path);
    write_manifest(manifest_path_for(out), std::move(m));
    return 0;
}

int cmd_flops(const Globals& g, const std::string& config_path, const std::string& lengths_text) {
    auto m = start_manifest("flops", g, {{"config", config_path}, {"lengths", lengths_text}});
    const RunConfig run = read_config(config_path);
    m.add_input(config_path);
    m.config = format_config(run);
    const auto lengths = parse_lengths(lengths_text);
    const auto sweep = flops::flops_sweep(run.model, lengths);
    std::string text = flops::format_flops(sweep.hierarchical);
    const auto& last_h = sweep.hierarchical.back();
    const auto& last_p = sweep.plain.back();
    std::cerr << "plain stack at L=" << fmt9(last_h.length) << ": " << fmt9(last_p.total())
              << " FLOPs, ratio plain/hierarchical " << fmt9(last_p.total() / last_h.total()) << "\n";
    if (sweep.crossing && *sweep.crossing == 0) {
        std::cerr << "hierarchical cheaper per token at every length\n";
    } else if (sweep.crossing) {
        std::cerr << "hierarchical cheaper per token beyond L=" << fmt9(*sweep.crossing) << "\n";
    } else {
        std::cerr << "hierarchical never cheaper per token than the plain stack\n";
    }
    finish_stdout(std::move(m), text);
    return 0;
}

int cmd_fit(const Globals& g, const std::string& points_path) {
    auto m = start_manifest("fit-scaling", g, {{"points", points_path}});
    const auto points = flops::parse_scaling_points(seq::read_text_file(points_path), points_path);
    m.add_input(points_path);
    finish_stdout(std::move(m), flops::format_fit(flops::fit_power_law(points)));
    return 0;
}

int fail(int code, const std::string& module, const std::string& what) {
    std::cerr << "ERROR " << code << " " << module << ": " << what << "\n";
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical nucleotide language model tools"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--threads", g.threads, "OpenMP threads (0 = runtime default)")->check(CLI::NonNegativeNumber);
    app.add_option("--precision", g.precision, "parameter precision: f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));

    std::string config, model, fasta, prompt, reference, variants, genome, genes, annotations, out, lengths, points;
    std::size_t length = 0;
    double temperature = 1.0;
    std::uint64_t seed = 0;

    auto* train = app.add_subcommand("train", "train a model from a config file");
    train->add_option("--config", config)->required();
    auto* ev = app.add_subcommand("eval", "held-out perplexity over genome windows");
    ev->add_option("--model", model)->required();
    ev->add_option("--fasta", fasta)->required();
    auto* gen = app.add_subcommand("generate", "sample a sequence");
    gen->add_option("--model", model)->required();
    gen->add_option("--length", length)->required();
    gen->add_option("--prompt", prompt);
    gen->add_option("--temperature", temperature);
    gen->add_option("--seed", seed);
    auto* vep = app.add_subcommand("vep", "variant effect scores");
    vep->add_option("--model", model)->required();
    vep->add_option("--reference", reference)->required();
    vep->add_option("--variants", variants)->required();
    vep->add_option("--out", out)->required();
    auto* ess = app.add_subcommand("essentiality", "knockout likelihood scores");
    ess->add_option("--model", model)->required();
    ess->add_option("--genome", genome)->required();
    ess->add_option("--genes", genes)->required();
    ess->add_option("--out", out)->required();
    auto* bnd = app.add_subcommand("boundaries", "boundary selection statistics");
    bnd->add_option("--model", model)->required();
    bnd->add_option("--genome", genome)->required();
    bnd->add_option("--annotations", annotations)->required();
    bnd->add_option("--out", out)->required();
    auto* fl = app.add_subcommand("flops", "analytic FLOP sweep");
    fl->add_option("--config", config)->required();
    fl->add_option("--lengths", lengths)->required();
    auto* fit = app.add_subcommand("fit-scaling", "power-law fit of perplexity against compute");
    fit->add_option("--points", points)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail(1, "cli", e.what());
    }

    try {
        if (g.threads > 0) omp_set_num_threads(g.threads);
        if (g.precision == "f32") ad::set_precision(ad::Precision::f32);
        if (*train) return cmd_train(g, config);
        if (*ev) return cmd_eval(g, model, fasta);
        if (*gen) return cmd_generate(g, model, length, prompt, temperature, seed);
        if (*vep) return cmd_vep(g, model, reference, variants, out);
        if (*ess) return cmd_essentiality(g, model, genome, genes, out);
        if (*bnd) return cmd_boundaries(g, model, genome, annotations, out);
        if (*fl) return cmd_flops(g, config, lengths);
        if (*fit) return cmd_fit(g, points);
    } catch (const Error& e) {
        return fail(static_cast<int>(e.kind()), e.module(), e.what());
    } catch (const std::exception& e) {
        return fail(2, "cli", e.what());
    }
    return fail(1, "cli", "no subcommand");
}
