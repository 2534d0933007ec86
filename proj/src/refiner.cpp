#include "twohand/refiner.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>

namespace twohand {

ErrorPair obtain_error(const TwoHandParams& params, const JointTargets& targets, const HandTemplate& tmpl,
                       const GridConfig& grid)
{
    const TwoHandMesh mesh = forward(tmpl, params);
    return {collision_loss(mesh, grid), (mesh.joints_3d - targets.joints_3d).squaredNorm()};
}

RefineConfig default_refine_config()
{
    return refine_config_for_order({kAllFactors.begin(), kAllFactors.end()});
}

RefineConfig refine_config_for_order(const std::vector<Factor>& order)
{
    RefineConfig c;
    for (Factor f : order)
        c.stages.push_back({f, default_stage_weights(f), true});
    validate(c);
    return c;
}

std::vector<Factor> parse_stage_order(const std::string& text)
{
    std::vector<Factor> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto first = item.find_first_not_of(" \t");
        item = first == std::string::npos ? std::string() : item.substr(first, item.find_last_not_of(" \t") - first + 1);
        const auto f = parse_factor(item);
        if (!f)
            throw InvalidArgument("unknown stage '" + item + "' (expected tau, phi, theta or beta)");
        out.push_back(*f);
    }
    std::array<int, 4> seen{};
    for (Factor f : out)
        ++seen[static_cast<int>(f)];
    if (seen != std::array<int, 4>{1, 1, 1, 1})
        throw InvalidArgument("stage order '" + text + "' must name tau, phi, theta and beta exactly once");
    return out;
}

void validate(const RefineConfig& config)
{
    std::array<int, 4> seen{};
    for (const auto& s : config.stages) {
        ++seen[static_cast<int>(s.factor)];
        validate(s.weights);
    }
    if (config.stages.size() != 4 || seen != std::array<int, 4>{1, 1, 1, 1})
        throw InvalidArgument("stage order must contain tau, phi, theta and beta exactly once");
    validate(config.grid);
}

int RefineReport::accepted_count() const
{
    int n = 0;
    for (const auto& s : stages)
        n += s.accepted ? 1 : 0;
    return n;
}

StageResult refine_stage(const TwoHandParams& params, Factor factor, const JointTargets& targets,
                         const HandTemplate& tmpl, const ObjectiveWeights& weights, const GridConfig& grid)
{
    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    StageResult out{params, 0, false};
    const Objective objective(tmpl, targets, weights, grid);
    const FactorSlice s = factor_slice(factor);
    Eigen::VectorXd x = pack(params);
    Eigen::VectorXd m = Eigen::VectorXd::Zero(s.size), v = Eigen::VectorXd::Zero(s.size);
    try {
        for (int it = 1; it <= weights.max_iterations; ++it) {
            const Eigen::VectorXd g = objective.gradient(unpack(x), factor).segment(s.offset, s.size);
            m = kBeta1 * m + (1.0 - kBeta1) * g;
            v = kBeta2 * v + (1.0 - kBeta2) * g.cwiseAbs2();
            const double c1 = 1.0 - std::pow(kBeta1, it), c2 = 1.0 - std::pow(kBeta2, it);
            x.segment(s.offset, s.size).array() -=
                weights.step_size * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
            out.iterations = it;
        }
        const TwoHandParams candidate = unpack(x);
        objective.evaluate(candidate);
        out.candidate = candidate;
    } catch (const NonFiniteValue&) {
        out.candidate = params;
        out.aborted = true;
    }
    return out;
}

StageModule descent_module()
{
    return [](const TwoHandParams& params, Factor factor, const StageContext& ctx) {
        return refine_stage(params, factor, ctx.targets, ctx.tmpl, ctx.weights, ctx.grid);
    };
}

Refiner::Refiner(const HandTemplate& tmpl)
    : tmpl_(&tmpl), warn_([](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; })
{
    modules_.fill(descent_module());
}

void Refiner::register_stage_module(Factor factor, StageModule module)
{
    const int k = static_cast<int>(factor);
    if (!module)
        throw InvalidArgument("stage module must be callable");
    if (custom_[k] && warn_)
        warn_(std::string("replacing the registered module for stage ") + factor_name(factor));
    modules_[k] = std::move(module);
    custom_[k] = true;
}

std::pair<TwoHandParams, RefineReport> Refiner::refine(const TwoHandParams& initial, const JointTargets& targets,
                                                       const RefineConfig& config) const
{
    validate(config);
    if (!initial.all_finite())
        throw NonFiniteValue("initial parameters contain non-finite values");
    RefineReport report;
    TwoHandParams current = initial;
    ErrorPair best = obtain_error(initial, targets, *tmpl_, config.grid);
    report.initial = best;
    for (const auto& stage : config.stages) {
        StageRecord rec;
        rec.factor = stage.factor;
        rec.before = best;
        const bool unimprovable = best.e_col == 0.0 || best.e_3d == 0.0;
        if (!stage.enabled || (config.skip_when_unimprovable && unimprovable)) {
            report.stages.push_back(rec);
            continue;
        }
        rec.ran = true;
        const auto t0 = std::chrono::steady_clock::now();
        const StageContext ctx{*tmpl_, targets, stage.weights, config.grid};
        const StageResult result = modules_[static_cast<int>(stage.factor)](current, stage.factor, ctx);
        rec.iterations = result.iterations;
        rec.aborted = result.aborted;
        const TwoHandParams candidate = replace_factor(current, result.candidate, stage.factor);
        if (!result.aborted && candidate.all_finite()) {
            rec.candidate = obtain_error(candidate, targets, *tmpl_, config.grid);
            if (rec.candidate.e_col < best.e_col && rec.candidate.e_3d < best.e_3d) {
                rec.accepted = true;
                current = candidate;
                best = rec.candidate;
            }
        } else {
            rec.aborted = true;
            rec.candidate = best;
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.stages.push_back(rec);
    }
    report.final_errors = best;
    report.final_params = current;
    return {current, report};
}

std::pair<TwoHandParams, RefineReport> factorized_refine(const HandTemplate& tmpl, const TwoHandParams& initial,
                                                         const JointTargets& targets, const RefineConfig& config)
{
    return Refiner(tmpl).refine(initial, targets, config);
}

}  // namespace twohand
