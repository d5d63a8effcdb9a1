#include "sml/injector.hpp"

#include <algorithm>

namespace sml {

PrototypeMode prototype_mode_from_string(const std::string& s) {
    if (s == "injector") return PrototypeMode::Injector;
    if (s == "meanpool") return PrototypeMode::MeanPool;
    throw ConfigError("unknown prototype mode: " + s);
}

std::string prototype_mode_to_string(PrototypeMode m) {
    return m == PrototypeMode::Injector ? "injector" : "meanpool";
}

namespace {

constexpr double kPrototypeEps = 1e-6;

std::vector<int> sorted_roster(std::vector<int> roster) {
    std::sort(roster.begin(), roster.end());
    roster.erase(std::unique(roster.begin(), roster.end()), roster.end());
    return roster;
}

} // namespace

template <typename Real>
Design<Real> assemble_design(Tape<Real>& tape, const std::vector<SupportView<Real>>& views,
                             const AttributeTable& attrs, const ClassNamer& namer,
                             const std::vector<int>& roster) {
    if (views.empty()) throw ContractError("assemble_design: no support views");
    Design<Real> design;
    design.roster = sorted_roster(roster);
    const int da = attrs.d_a();
    const int cols = 2 * static_cast<int>(views.size());
    design.attrs = Mat(da, cols);
    const std::vector<double>& a_bg = attrs.background();

    std::vector<Tensor<Real>> phi_cols;
    phi_cols.reserve(views.size() * 2);
    int col = 0;
    for (const auto& view : views) {
        if (!std::binary_search(design.roster.begin(), design.roster.end(), view.class_id))
            throw ContractError("support view class " + std::to_string(view.class_id) +
                                " is not in the episode roster");
        const std::vector<double>& a_c = attrs.at(namer(view.class_id));
        auto [fg, bg] = masked_average_pool(tape, view.features, *view.mask, view.class_id);
        const int d = fg.shape()[0];
        phi_cols.push_back(tape.reshape(fg, {d, 1}));
        phi_cols.push_back(tape.reshape(bg, {d, 1}));
        for (int r = 0; r < da; ++r) {
            design.attrs(r, col) = a_c[r];
            design.attrs(r, col + 1) = a_bg[r];
        }
        col += 2;
    }
    design.phi = tape.concat_cols(phi_cols);
    return design;
}

template <typename Real>
std::vector<int> InjectorSolution<Real>::stack_order() const {
    std::vector<int> order{0};
    order.insert(order.end(), roster.begin(), roster.end());
    return order;
}

template <typename Real>
InjectorSolution<Real> fit_prototypes(Tape<Real>& tape, const Design<Real>& design,
                                      const Tensor<Real>& lambda, const AttributeTable& attrs,
                                      const ClassNamer& namer) {
    InjectorSolution<Real> sol;
    sol.roster = design.roster;
    sol.lambda = static_cast<double>(lambda.values()[0]);
    sol.weights = ridge_solve(tape, design.phi, design.attrs, lambda);
    const int d = sol.weights.shape()[0];
    const int da = sol.weights.shape()[1];

    auto prototype_for = [&](const std::vector<double>& attr) {
        std::vector<Real> a(attr.size());
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<Real>(attr[i]);
        auto raw = tape.matmul(sol.weights, Tensor<Real>::constant({da, 1}, std::move(a)));
        return tape.l2_normalize_or_zero(tape.reshape(raw, {d}), Real(kPrototypeEps));
    };
    sol.prototypes.emplace(0, prototype_for(attrs.background()));
    for (int c : sol.roster) sol.prototypes.emplace(c, prototype_for(attrs.at(namer(c))));
    return sol;
}

template <typename Real>
InjectorSolution<Real> mean_prototypes(Tape<Real>& tape,
                                       const std::vector<SupportView<Real>>& views,
                                       const std::vector<int>& roster) {
    if (views.empty()) throw ContractError("mean_prototypes: no support views");
    InjectorSolution<Real> sol;
    sol.roster = sorted_roster(roster);

    std::map<int, std::vector<Tensor<Real>>> fg_by_class;
    std::vector<Tensor<Real>> bg_all;
    int d = 0;
    for (const auto& view : views) {
        auto [fg, bg] = masked_average_pool(tape, view.features, *view.mask, view.class_id);
        d = fg.shape()[0];
        fg_by_class[view.class_id].push_back(fg);
        bg_all.push_back(bg);
    }

    auto mean_of = [&](const std::vector<Tensor<Real>>& parts) {
        Tensor<Real> acc = parts[0];
        for (std::size_t i = 1; i < parts.size(); ++i) acc = tape.add(acc, parts[i]);
        acc = tape.scale(acc, Real(1) / static_cast<Real>(parts.size()));
        return tape.l2_normalize_or_zero(acc, Real(kPrototypeEps));
    };
    sol.prototypes.emplace(0, mean_of(bg_all));
    for (int c : sol.roster) {
        auto it = fg_by_class.find(c);
        sol.prototypes.emplace(c, it != fg_by_class.end()
                                      ? mean_of(it->second)
                                      : Tensor<Real>::zeros({d}));
    }
    return sol;
}

template struct InjectorSolution<float>;
template struct InjectorSolution<double>;
template Design<float> assemble_design(Tape<float>&, const std::vector<SupportView<float>>&,
                                       const AttributeTable&, const ClassNamer&,
                                       const std::vector<int>&);
template Design<double> assemble_design(Tape<double>&, const std::vector<SupportView<double>>&,
                                        const AttributeTable&, const ClassNamer&,
                                        const std::vector<int>&);
template InjectorSolution<float> fit_prototypes(Tape<float>&, const Design<float>&,
                                                const Tensor<float>&, const AttributeTable&,
                                                const ClassNamer&);
template InjectorSolution<double> fit_prototypes(Tape<double>&, const Design<double>&,
                                                 const Tensor<double>&, const AttributeTable&,
                                                 const ClassNamer&);
template InjectorSolution<float> mean_prototypes(Tape<float>&,
                                                 const std::vector<SupportView<float>>&,
                                                 const std::vector<int>&);
template InjectorSolution<double> mean_prototypes(Tape<double>&,
                                                  const std::vector<SupportView<double>>&,
                                                  const std::vector<int>&);

} // namespace sml
