/*
 * Copyright (C) 2026 The mvaug authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "mvaug/mvaug.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

int cmd_generate(const std::string& config_path, uint64_t* seed_override,
                 int* jobs_override, bool overwrite) {
    mvaug::RunConfig config = mvaug::load_run_config(config_path);
    if (seed_override) config.seed = *seed_override;
    if (jobs_override) config.jobs = *jobs_override;
    if (overwrite) config.overwrite = true;
    for (const auto& w : config.load_warnings) std::cerr << "warning: " << w << "\n";

    mvaug::RunReport report = mvaug::run_batch(config);
    std::cout << report.table();
    std::cout << "report written to " << (config.output / "report.json").string() << "\n";
    return kExitOk;
}

int cmd_validate(const std::string& dataset, double min_coverage) {
    auto manifests = mvaug::list_scene_manifests(dataset);
    int rejected = 0;
    for (const auto& path : manifests) {
        try {
            auto manifest = mvaug::load_manifest(path);
            auto result = mvaug::validate_input(manifest, min_coverage);
            if (result.ok) {
                std::printf("OK        %-24s coverage %.1f%%\n",
                            manifest.scene_id.c_str(), 100.0 * result.coverage);
            } else {
                ++rejected;
                std::printf("REJECTED  %-24s %s (%s)\n", manifest.scene_id.c_str(),
                            result.reason.c_str(), result.detail.c_str());
            }
        } catch (const std::invalid_argument& e) {
            ++rejected;
            std::printf("REJECTED  %-24s parse (%s)\n", path.filename().string().c_str(),
                        e.what());
        }
    }
    std::printf("%zu scene(s), %d rejected\n", manifests.size(), rejected);
    return rejected == 0 ? kExitOk : kExitValidation;
}

int cmd_fixture(const std::string& kind, const std::string& out, uint64_t seed, int scenes) {
    mvaug::FixtureOptions options;
    options.scenes = scenes;
    mvaug::gen_fixture(mvaug::fixture_kind_from_string(kind), out, seed, options);
    std::cout << "fixture '" << kind << "' written to " << out << " (" << scenes
              << " scenes, seed " << seed << ")\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& pred, const std::string& gt, const std::string& task,
                 double radius, const std::string& report_out) {
    mvaug::json report;
    std::string table;
    if (task == "obstacle") {
        auto eval = mvaug::evaluate_obstacles(pred, gt);
        table = eval.table();
        report["task"] = "obstacle";
        report["scenes"] = eval.scenes;
        for (const auto& [cls, m] : eval.per_class)
            report["classes"][cls] = {{"average_precision", m.average_precision},
                                      {"fscore", m.fscore},
                                      {"position_error_m", m.position_error_m},
                                      {"yaw_error_deg", m.yaw_error_deg},
                                      {"tp", m.tp},
                                      {"fp", m.fp},
                                      {"fn", m.fn}};
    } else if (task == "freespace") {
        auto eval = mvaug::evaluate_freespace(pred, gt, radius);
        table = eval.table();
        report["task"] = "freespace";
        report["scenes"] = eval.scenes;
        report["abs_gap_m"] = eval.aggregate.abs_gap_m;
        report["rel_gap"] = eval.aggregate.rel_gap;
        report["success_rate"] = eval.aggregate.success_rate;
        report["precision"] = eval.aggregate.precision;
        report["recall"] = eval.aggregate.recall;
        report["bins_evaluated"] = eval.aggregate.bins_evaluated;
    } else {
        std::cerr << "unknown task: " << task << "\n";
        return kExitValidation;
    }
    std::cout << table;
    if (!report_out.empty())
        mvaug::write_text_file(report_out, report.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-view synthetic object augmentation pipeline"};
    app.require_subcommand(1);

    auto* gen = app.add_subcommand("generate", "augment a dataset per a run config");
    std::string config_path;
    uint64_t seed = 0;
    int jobs = 0;
    bool overwrite = false;
    gen->add_option("--config", config_path, "run configuration JSON")->required();
    auto* seed_opt = gen->add_option("--seed", seed, "override the config seed");
    auto* jobs_opt = gen->add_option("--jobs", jobs, "override the worker count");
    gen->add_flag("--overwrite", overwrite, "allow writing into a non-empty output");

    auto* val = app.add_subcommand("validate", "check dataset suitability");
    std::string dataset;
    double min_coverage = 0.6;
    val->add_option("--dataset", dataset, "dataset directory")->required();
    val->add_option("--min-coverage", min_coverage, "required solid-angle coverage");

    auto* fix = app.add_subcommand("fixture", "write a procedural toy dataset");
    std::string kind, out;
    uint64_t fixture_seed = 0;
    int scenes = 6;
    fix->add_option("--kind", kind, "surround-fisheye | stereo-pinhole | parking")
        ->required();
    fix->add_option("--out", out, "output directory")->required();
    fix->add_option("--seed", fixture_seed, "fixture seed")->required();
    fix->add_option("--scenes", scenes, "number of scenes (default 6)");

    auto* ev = app.add_subcommand("evaluate", "compare predictions against ground truth");
    std::string pred_dir, gt_dir, task, report_out;
    double radius = 10.0;
    ev->add_option("--pred", pred_dir, "predicted dataset directory")->required();
    ev->add_option("--gt", gt_dir, "ground-truth dataset directory")->required();
    ev->add_option("--task", task, "obstacle | freespace")->required();
    ev->add_option("--radius", radius, "freespace radius limit in meters (default 10)");
    ev->add_option("--report", report_out, "also write a JSON report here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed())
            return cmd_generate(config_path, seed_opt->count() ? &seed : nullptr,
                                jobs_opt->count() ? &jobs : nullptr, overwrite);
        if (val->parsed()) return cmd_validate(dataset, min_coverage);
        if (fix->parsed()) return cmd_fixture(kind, out, fixture_seed, scenes);
        if (ev->parsed()) return cmd_evaluate(pred_dir, gt_dir, task, radius, report_out);
    } catch (const mvaug::IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return kExitIo;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    }
    return kExitOk;
}
