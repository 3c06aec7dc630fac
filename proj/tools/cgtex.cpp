#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cgtex/config.hpp"
#include "cgtex/gradcheck.hpp"
#include "cgtex/generator.hpp"
#include "cgtex/inpainting.hpp"
#include "cgtex/metrics.hpp"
#include "cgtex/parallel.hpp"
#include "cgtex/trainer.hpp"

namespace fs = std::filesystem;
using namespace cgtex;

namespace {

TextureExemplar load_exemplar(const std::string& path) {
    if (fs::is_directory(path)) return load_frames(path);
    const std::string ext = fs::path(path).extension().string();
    if (ext == ".png") return load_image(path);
    if (ext == ".wav") return load_sound(path);
    throw ContractError("cannot infer the modality of " + path +
                        " (expected .png, .wav or a frame directory)");
}

Tensor clamp_to_range(const Tensor& t, float lo, float hi) {
    Tensor out = t.clone();
    for (std::int64_t i = 0; i < out.numel(); ++i)
        out.data()[i] = std::clamp(out.data()[i], lo, hi);
    return out;
}

void write_sample(const TextureExemplar& like, const Tensor& sample, const std::string& stem) {
    switch (like.modality) {
        case Modality::image:
            save_image(clamp_to_range(sample, 0.0f, 1.0f), stem + ".png");
            break;
        case Modality::sound:
            save_sound(clamp_to_range(sample, -1.0f, 1.0f),
                       like.sample_rate ? like.sample_rate : 22050, stem + ".wav");
            break;
        case Modality::dynamic: {
            Tensor clamped = clamp_to_range(sample, 0.0f, 1.0f);
            save_frames(clamped, stem);
            save_gif(clamped, stem + ".gif");
            break;
        }
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << text;
    if (!f) throw IoError("short write to " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::vector<int> parse_size(const std::string& s) {
    std::vector<int> out;
    size_t pos = 0;
    while (pos < s.size()) {
        size_t next = s.find('x', pos);
        if (next == std::string::npos) next = s.size();
        try {
            out.push_back(std::stoi(s.substr(pos, next - pos)));
        } catch (const std::exception&) {
            throw ContractError("bad --size value: " + s);
        }
        pos = next + 1;
    }
    if (out.empty()) throw ContractError("bad --size value: " + s);
    return out;
}

int cmd_synth(const std::string& exemplar_path, const std::string& config_path,
              const std::string& out_override) {
    JobConfig job = config_path.empty() ? JobConfig{} : parse_job_config_file(config_path);
    if (!out_override.empty()) job.out_dir = out_override;

    TextureExemplar ex = load_exemplar(exemplar_path);
    if (job.resize) {
        if (ex.modality != Modality::image)
            throw ConfigError("resize only applies to image exemplars");
        if (job.resize->size() != 2) throw ConfigError("resize expects [H, W]");
        ex.data = resize_bilinear(ex.data, (*job.resize)[0], (*job.resize)[1]);
    }

    fs::create_directories(job.out_dir);
    write_text((fs::path(job.out_dir) / "effective-config.json").string(),
               effective_config_json(job, ex.modality));

    NetworkSpec spec = resolved_spec(job, ex.modality);
    TrainConfig train = resolved_train_config(job);
    const int report_every = std::max(1, train.iterations / 20);
    train.progress = [&](int t, double e) {
        if (t % report_every == 0 || t == train.iterations)
            std::fprintf(stderr, "iter %d/%d  mean energy %.6g\n", t, train.iterations, e);
    };
    if (train.snapshot_interval > 0) {
        const fs::path snapdir = fs::path(job.out_dir) / "snapshots";
        fs::create_directories(snapdir);
        train.snapshot_hook = [&, snapdir](int t, const std::vector<Tensor>& samples) {
            for (size_t k = 0; k < samples.size(); ++k) {
                char stem[64];
                std::snprintf(stem, sizeof(stem), "iter_%06d_sample_%zu", t, k);
                write_sample(ex, samples[k], (snapdir / stem).string());
            }
        };
    }

    TrainResult result;
    GeneratorSpec gspec = GeneratorSpec::make(ex.modality);
    switch (train.mode) {
        case TrainMode::c_cgcnn:
            result = train_c_cgcnn(ex, spec, train);
            break;
        case TrainMode::fixed_d:
            result = train_fixed_d(ex, spec, train);
            break;
        case TrainMode::f_cgcnn:
            result = train_f_cgcnn(ex, spec, gspec, train);
            break;
    }

    for (size_t k = 0; k < result.samples.size(); ++k)
        write_sample(ex, result.samples[k],
                     (fs::path(job.out_dir) / ("sample_" + std::to_string(k))).string());
    write_trace_csv(result.trace, (fs::path(job.out_dir) / "energy_trace.csv").string());

    NamedTensors tensors;
    append_energy_net(result.net, &tensors);
    nlohmann::json model;
    model["modality"] = to_string(ex.modality);
    model["energy"] = nlohmann::json::parse(result.net.spec().to_json());
    if (train.mode == TrainMode::f_cgcnn) {
        append_generator_net(result.gen, &tensors);
        model["generator"] = nlohmann::json::parse(result.gen.spec().to_json());
    } else {
        model["generator"] = nullptr;
    }
    save_checkpoint((fs::path(job.out_dir) / "model.cgcn").string(), tensors);
    write_text((fs::path(job.out_dir) / "model.json").string(), model.dump(2) + "\n");
    return 0;
}

int cmd_expand(const std::string& model_dir, const std::string& size_str, std::uint64_t seed,
               const std::string& out_override) {
    const fs::path dir(model_dir);
    nlohmann::json model = nlohmann::json::parse(read_text((dir / "model.json").string()));
    if (model.at("generator").is_null())
        throw ContractError(
            "checkpoint has no generator; expansion needs an f-cgcnn training run");
    GeneratorSpec gspec = GeneratorSpec::from_json(model.at("generator").dump());
    GeneratorNet gen = generator_net_from_checkpoint(
        gspec, load_checkpoint((dir / "model.cgcn").string()));

    const std::vector<int> size = parse_size(size_str);
    NoisePyramid z = sample_noise(gspec, size, seed);
    Tensor out = generate(gen, z);

    TextureExemplar like;
    like.modality = gspec.modality;
    like.sample_rate = 22050;
    std::string stem = out_override.empty() ? (dir / "expanded").string() : out_override;
    // strip a known extension so write_sample can append the right one
    for (const char* ext : {".png", ".wav", ".gif"}) {
        if (stem.size() > 4 && stem.ends_with(ext)) {
            stem = stem.substr(0, stem.size() - 4);
            break;
        }
    }
    write_sample(like, out, stem);
    return 0;
}

int cmd_inpaint(const std::string& exemplar_path, const std::string& mask_path,
                const std::string& interval_str, const std::string& config_path,
                const std::string& out_override) {
    JobConfig job = config_path.empty() ? JobConfig{} : parse_job_config_file(config_path);
    if (!out_override.empty()) job.out_dir = out_override;
    TextureExemplar ex = load_exemplar(exemplar_path);

    MaskRegion region;
    const int border = resolved_border(job, ex.modality);
    if (ex.modality == Modality::sound) {
        std::int64_t a = 0, b = 0;
        if (!interval_str.empty()) {
            if (std::sscanf(interval_str.c_str(), "%lld:%lld", reinterpret_cast<long long*>(&a),
                            reinterpret_cast<long long*>(&b)) != 2)
                throw ContractError("bad --interval value, expected start:end");
        } else if (job.inpaint.interval && job.inpaint.interval->size() == 2) {
            a = (*job.inpaint.interval)[0];
            b = (*job.inpaint.interval)[1];
        } else {
            throw ContractError("sound inpainting needs --interval start:end");
        }
        region = make_interval_mask(ex.data.shape()[0], a, b, border);
    } else {
        if (mask_path.empty()) throw ContractError("inpainting needs --mask for this modality");
        MaskRegion mask2d = load_mask(mask_path, border);
        region = ex.modality == Modality::dynamic
                     ? replicate_mask_frames(mask2d, ex.data.shape()[2])
                     : std::move(mask2d);
    }

    fs::create_directories(job.out_dir);
    write_text((fs::path(job.out_dir) / "effective-config.json").string(),
               effective_config_json(job, ex.modality));

    InpaintConfig cfg;
    cfg.search_steps = job.inpaint.search_steps;
    cfg.update_steps = job.inpaint.update_steps;
    cfg.grid_stride = job.inpaint.grid_stride;
    cfg.spec = resolved_spec(job, ex.modality);
    cfg.sampler.step_size = job.epsilon;
    cfg.sampler.steps = job.langevin_steps;
    cfg.sampler.noise = job.noise;
    cfg.sampler.preconditioner = job.preconditioner;
    cfg.weight_optimizer =
        job.preconditioner == OptKind::plain ? OptKind::adam : job.preconditioner;
    cfg.lr_w = job.lr_w;
    cfg.template_offset = job.inpaint.template_offset;
    cfg.seed = job.seed;

    InpaintResult result = inpaint(ex, region, cfg);

    const std::string stem = (fs::path(job.out_dir) / "inpainted").string();
    write_sample(ex, result.output, stem);

    nlohmann::json log;
    log["templates"] = nlohmann::json::array();
    for (const TemplateMatch& m : result.templates)
        log["templates"].push_back(
            {{"offset", m.offset}, {"extents", m.extents}, {"energy", m.energy}});
    log["start_energies"] = result.start_energies;
    log["final_energies"] = result.final_energies;
    write_text((fs::path(job.out_dir) / "inpaint_log.json").string(), log.dump(2) + "\n");
    return 0;
}

double eval_pair(const std::string& a_path, const std::string& b_path) {
    TextureExemplar a = load_exemplar(a_path);
    TextureExemplar b = load_exemplar(b_path);
    if (a.modality != b.modality)
        throw ContractError("eval inputs have different modalities");
    if (a.modality == Modality::dynamic) return ms_ssim_frames(a.data, b.data);
    return ms_ssim(a.data, b.data);
}

int cmd_eval(const std::string& a_path, const std::string& b_path,
             const std::string& pairs_path) {
    if (!pairs_path.empty()) {
        std::ifstream f(pairs_path);
        if (!f) throw IoError("cannot open " + pairs_path);
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            const size_t c1 = line.find(',');
            const size_t c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
                throw ContractError("pairs file lines must be: id,pathA,pathB");
            const std::string id = line.substr(0, c1);
            const double score =
                eval_pair(line.substr(c1 + 1, c2 - c1 - 1), line.substr(c2 + 1));
            std::printf("%s,%.4f\n", id.c_str(), score);
        }
        return 0;
    }
    std::printf("%.4f\n", eval_pair(a_path, b_path));
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int cases) {
    GradCheckReport report = run_gradient_suite(seed, cases, &std::cerr);
    std::printf("gradcheck: %d cases, %d components, %d kink skips, %d failures\n",
                report.cases, report.components, report.kink_skips, report.failures);
    for (const std::string& note : report.notes) std::fprintf(stderr, "  %s\n", note.c_str());
    return report.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cgtex: exemplar-based texture synthesis, expansion and inpainting"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "worker count (overrides CGTEX_THREADS)");

    std::string exemplar, config_path, out_dir, mask_path, interval, size_str;
    std::string eval_a, eval_b, pairs_path, model_dir;
    std::uint64_t seed = 0;
    int cases = 20;

    CLI::App* synth = app.add_subcommand("synth", "train on an exemplar and write samples");
    synth->add_option("exemplar", exemplar, "PNG, WAV or frame directory")->required();
    synth->add_option("--config", config_path, "job config JSON");
    synth->add_option("--out", out_dir, "output directory (overrides config)");

    CLI::App* expand = app.add_subcommand("expand", "generate at a new size from a checkpoint");
    expand->add_option("model", model_dir, "directory with model.cgcn and model.json")
        ->required();
    expand->add_option("--size", size_str, "output size, e.g. 512x512 or 122880")->required();
    expand->add_option("--seed", seed, "noise seed");
    expand->add_option("--out", out_dir, "output path stem");

    CLI::App* inpaint_cmd = app.add_subcommand("inpaint", "fill a corrupted region");
    inpaint_cmd->add_option("exemplar", exemplar, "corrupted exemplar")->required();
    inpaint_cmd->add_option("--mask", mask_path, "mask PNG (nonzero = corrupted)");
    inpaint_cmd->add_option("--interval", interval, "sound mask start:end");
    inpaint_cmd->add_option("--config", config_path, "job config JSON");
    inpaint_cmd->add_option("--out", out_dir, "output directory (overrides config)");

    CLI::App* eval_cmd = app.add_subcommand("eval", "MS-SSIM between two textures");
    eval_cmd->add_option("a", eval_a, "first texture");
    eval_cmd->add_option("b", eval_b, "second texture");
    eval_cmd->add_option("--pairs", pairs_path, "CSV of id,pathA,pathB rows");

    CLI::App* grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    grad->add_option("--seed", seed, "suite seed");
    grad->add_option("--cases", cases, "cases per operation");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (threads > 0) set_worker_count(threads);

    try {
        if (synth->parsed()) return cmd_synth(exemplar, config_path, out_dir);
        if (expand->parsed()) return cmd_expand(model_dir, size_str, seed, out_dir);
        if (inpaint_cmd->parsed())
            return cmd_inpaint(exemplar, mask_path, interval, config_path, out_dir);
        if (eval_cmd->parsed()) {
            if (pairs_path.empty() && (eval_a.empty() || eval_b.empty()))
                throw ContractError("eval needs two textures or --pairs");
            return cmd_eval(eval_a, eval_b, pairs_path);
        }
        if (grad->parsed()) return cmd_gradcheck(seed, cases);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const SpecError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
