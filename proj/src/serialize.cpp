#include "refx/serialize.hpp"

#include <cmath>
#include <limits>

namespace refx {

namespace {

Json vec(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vector to_vector(const Json& a) {
  Vector v(static_cast<Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    v[static_cast<Index>(i)] = a[i].is_null() ? std::numeric_limits<double>::quiet_NaN()
                                              : a[i].get<double>();
  return v;
}

Json named(const std::vector<std::string>& names, const Vector& v) {
  Json o = Json::object();
  for (std::size_t i = 0; i < names.size(); ++i) o[names[i]] = v[static_cast<Index>(i)];
  return o;
}

Json envelope(std::string_view method, const ReferenceInfo& ref,
              std::optional<std::uint64_t> seed, Json payload) {
  Json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["method"] = method;
  doc["reference"] = to_json(ref);
  doc["seed"] = seed ? Json(*seed) : Json(nullptr);
  doc["payload"] = std::move(payload);
  return doc;
}

void check_envelope(const Json& doc, std::string_view method) {
  if (!doc.is_object() || doc.value("schema_version", "") != std::string(kSchemaVersion))
    throw Error("artifact: unsupported or missing schema_version");
  if (!method.empty() && doc.at("method").get<std::string>() != method)
    throw Error("artifact: expected method '" + std::string(method) + "', found '" +
                doc.at("method").get<std::string>() + "'");
}

std::optional<std::uint64_t> seed_of(const Json& doc) {
  if (doc.at("seed").is_null()) return std::nullopt;
  return doc.at("seed").get<std::uint64_t>();
}

AttributionMethod parse_method(const std::string& m) {
  if (m == "shapley_exact") return AttributionMethod::kShapleyExact;
  if (m == "shapley_sampled") return AttributionMethod::kShapleySampled;
  if (m == "breakdown") return AttributionMethod::kBreakdown;
  throw Error("artifact: unknown attribution method '" + m + "'");
}

ProfileKind parse_kind(const std::string& k) {
  if (k == "pdp") return ProfileKind::kPdp;
  if (k == "ale") return ProfileKind::kAle;
  if (k == "ice") return ProfileKind::kIce;
  throw Error("artifact: unknown profile kind '" + k + "'");
}

Json distance_json(const CurveDistance& d) { return Json{{"l2", d.l2}, {"sup", d.sup}}; }

CurveDistance distance_from(const Json& j) {
  return {j.at("l2").get<double>(), j.at("sup").get<double>()};
}

}  // namespace

Json to_json(const ReferenceInfo& ref) {
  Json j;
  j["label"] = ref.label;
  j["n_rows"] = ref.n_rows;
  j["spec"] = ref.spec;
  return j;
}

ReferenceInfo reference_from_json(const Json& j) {
  return {j.at("label").get<std::string>(), j.at("n_rows").get<Index>(),
          j.at("spec").get<std::string>()};
}

// ---------------------------------------------------------------------------

Json to_json(const AttributionSet& a) {
  Json p;
  p["value_function"] = a.value_function;
  p["features"] = a.features;
  p["instance"] = named(a.features, a.instance);
  p["attributions"] = named(a.features, a.values);
  p["baseline"] = a.baseline;
  p["prediction"] = a.prediction;
  if (a.std_errors) p["std_errors"] = named(a.features, *a.std_errors);
  if (a.method == AttributionMethod::kShapleySampled) {
    p["n_permutations"] = a.n_permutations;
    p["max_path_residual"] = a.max_path_residual;
  }
  if (!a.order.empty()) p["order"] = a.order;
  return envelope(to_string(a.method), a.reference, a.seed, std::move(p));
}

AttributionSet attribution_from_json(const Json& doc) {
  check_envelope(doc, "");
  const auto method = parse_method(doc.at("method").get<std::string>());
  const Json& p = doc.at("payload");
  const auto features = p.at("features").get<std::vector<std::string>>();
  auto read_named = [&](const Json& o) {
    Vector v(static_cast<Index>(features.size()));
    for (std::size_t i = 0; i < features.size(); ++i)
      v[static_cast<Index>(i)] = o.at(features[i]).get<double>();
    return v;
  };
  AttributionSet a{.features = features,
                   .values = read_named(p.at("attributions")),
                   .instance = read_named(p.at("instance")),
                   .baseline = p.at("baseline").get<double>(),
                   .prediction = p.at("prediction").get<double>(),
                   .method = method,
                   .reference = reference_from_json(doc.at("reference")),
                   .value_function = p.at("value_function").get<std::string>(),
                   .seed = seed_of(doc)};
  if (p.contains("std_errors")) a.std_errors = read_named(p.at("std_errors"));
  if (p.contains("n_permutations")) a.n_permutations = p.at("n_permutations").get<Index>();
  if (p.contains("max_path_residual"))
    a.max_path_residual = p.at("max_path_residual").get<double>();
  if (p.contains("order")) a.order = p.at("order").get<std::vector<std::string>>();
  return a;
}

// ---------------------------------------------------------------------------

Json to_json(const Profile& pr) {
  Json p;
  p["feature"] = pr.feature;
  p["grid"] = vec(pr.grid);
  p["values"] = vec(pr.values);
  if (pr.instance_id) p["instance_id"] = *pr.instance_id;
  if (pr.kind == ProfileKind::kAle) p["empty_bins"] = pr.empty_bins;
  return envelope(to_string(pr.kind), pr.reference, std::nullopt, std::move(p));
}

Profile profile_from_json(const Json& doc) {
  check_envelope(doc, "");
  const auto kind = parse_kind(doc.at("method").get<std::string>());
  const Json& p = doc.at("payload");
  Profile pr{.feature = p.at("feature").get<std::string>(),
             .grid = to_vector(p.at("grid")),
             .values = to_vector(p.at("values")),
             .kind = kind,
             .reference = reference_from_json(doc.at("reference"))};
  if (p.contains("instance_id")) pr.instance_id = p.at("instance_id").get<Index>();
  if (p.contains("empty_bins")) pr.empty_bins = p.at("empty_bins").get<std::vector<Index>>();
  return pr;
}

Json to_json(const std::vector<Profile>& curves) {
  if (curves.empty()) throw InvalidArgument("ice artifact needs at least one curve");
  Json p;
  p["feature"] = curves.front().feature;
  p["grid"] = vec(curves.front().grid);
  Json list = Json::array();
  for (const auto& c : curves) {
    Json e;
    e["instance_id"] = c.instance_id.value_or(0);
    e["values"] = vec(c.values);
    list.push_back(std::move(e));
  }
  p["curves"] = std::move(list);
  return envelope("ice", curves.front().reference, std::nullopt, std::move(p));
}

std::vector<Profile> ice_from_json(const Json& doc) {
  check_envelope(doc, "ice");
  const Json& p = doc.at("payload");
  const auto ref = reference_from_json(doc.at("reference"));
  const Vector grid = to_vector(p.at("grid"));
  std::vector<Profile> out;
  for (const auto& c : p.at("curves"))
    out.push_back(Profile{.feature = p.at("feature").get<std::string>(),
                          .grid = grid,
                          .values = to_vector(c.at("values")),
                          .kind = ProfileKind::kIce,
                          .reference = ref,
                          .instance_id = c.at("instance_id").get<Index>()});
  return out;
}

// ---------------------------------------------------------------------------

Json to_json(const ImportanceTable& t) {
  Json p;
  p["loss"] = to_string(t.loss);
  p["baseline_loss"] = t.baseline_loss;
  p["repeats"] = t.repeats;
  Json rows = Json::array();
  for (std::size_t i = 0; i < t.features.size(); ++i) {
    Json r;
    r["feature"] = t.features[i];
    r["ratio"] = t.ratios[static_cast<Index>(i)];
    r["per_repeat"] = vec(t.per_repeat.row(static_cast<Index>(i)).transpose());
    rows.push_back(std::move(r));
  }
  p["features"] = std::move(rows);
  return envelope("permutation_importance", t.reference, t.seed, std::move(p));
}

ImportanceTable importance_from_json(const Json& doc) {
  check_envelope(doc, "permutation_importance");
  const Json& p = doc.at("payload");
  const auto& rows = p.at("features");
  const Index repeats = p.at("repeats").get<Index>();
  ImportanceTable t{.ratios = Vector(static_cast<Index>(rows.size())),
                    .per_repeat = Matrix(static_cast<Index>(rows.size()), repeats),
                    .baseline_loss = p.at("baseline_loss").get<double>(),
                    .loss = parse_loss(p.at("loss").get<std::string>()),
                    .repeats = repeats,
                    .seed = seed_of(doc).value_or(0),
                    .reference = reference_from_json(doc.at("reference"))};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.features.push_back(rows[i].at("feature").get<std::string>());
    t.ratios[static_cast<Index>(i)] = rows[i].at("ratio").get<double>();
    t.per_repeat.row(static_cast<Index>(i)) =
        to_vector(rows[i].at("per_repeat")).transpose();
  }
  return t;
}

// ---------------------------------------------------------------------------

Json to_json(const ContrastReport& r) {
  Json p;
  p["tolerance"] = r.tolerance;
  Json inputs = Json::array();
  for (const auto& a : r.inputs) {
    Json doc = to_json(a);
    doc.erase("schema_version");
    inputs.push_back(std::move(doc));
  }
  p["inputs"] = std::move(inputs);
  Json feats = Json::array();
  for (const auto& f : r.features) {
    Json e;
    e["feature"] = f.feature;
    e["values"] = vec(f.values);
    e["max_delta"] = f.max_delta;
    e["sign_flip"] = f.sign_flip;
    feats.push_back(std::move(e));
  }
  p["features"] = std::move(feats);
  Json sp = Json::array();
  for (Index a = 0; a < r.spearman.rows(); ++a) sp.push_back(vec(r.spearman.row(a).transpose()));
  p["spearman_abs"] = std::move(sp);
  p["rankings"] = r.rankings;
  return envelope("contrast", r.reference(), std::nullopt, std::move(p));
}

ContrastReport contrast_from_json(const Json& doc) {
  check_envelope(doc, "contrast");
  const Json& p = doc.at("payload");
  ContrastReport r{.tolerance = p.at("tolerance").get<double>()};
  for (Json input : p.at("inputs")) {
    input["schema_version"] = kSchemaVersion;
    r.inputs.push_back(attribution_from_json(input));
  }
  for (const auto& e : p.at("features"))
    r.features.push_back({e.at("feature").get<std::string>(), to_vector(e.at("values")),
                          e.at("max_delta").get<double>(), e.at("sign_flip").get<bool>()});
  const auto& sp = p.at("spearman_abs");
  r.spearman = Matrix(static_cast<Index>(sp.size()), static_cast<Index>(sp.size()));
  for (std::size_t a = 0; a < sp.size(); ++a)
    r.spearman.row(static_cast<Index>(a)) = to_vector(sp[a]).transpose();
  r.rankings = p.at("rankings").get<std::vector<std::vector<std::string>>>();
  return r;
}

// ---------------------------------------------------------------------------

Json to_json(const DriftReport& r) {
  Json p;
  p["reference_a"] = to_json(r.reference_a);
  p["reference_b"] = to_json(r.reference_b);
  p["kappa"] = r.kappa;
  p["delta"] = r.delta;
  p["grid"] = Json{{"strategy", to_string(r.grid)}, {"points", r.grid_points}};
  p["bins"] = r.bins;
  p["loss"] = to_string(r.loss);
  p["loss_a"] = r.loss_a ? Json(*r.loss_a) : Json(nullptr);
  p["loss_b"] = r.loss_b ? Json(*r.loss_b) : Json(nullptr);
  p["similar_marginals_different_explanations"] = r.similar_marginals_different_explanations;
  Json feats = Json::array();
  for (const auto& f : r.features) {
    Json e;
    e["feature"] = f.feature;
    e["ks"] = f.ks;
    e["w1"] = f.w1;
    e["pdp_distance"] = distance_json(f.pdp);
    e["ale_distance"] = distance_json(f.ale);
    Json curves;
    for (const auto& [name, prof] :
         {std::pair{"pdp_a", &f.pdp_a}, {"pdp_b", &f.pdp_b}, {"ale_a", &f.ale_a},
          {"ale_b", &f.ale_b}}) {
      Json c;
      c["grid"] = vec(prof->grid);
      c["values"] = vec(prof->values);
      if (prof->kind == ProfileKind::kAle) c["empty_bins"] = prof->empty_bins;
      curves[name] = std::move(c);
    }
    e["curves"] = std::move(curves);
    feats.push_back(std::move(e));
  }
  p["features"] = std::move(feats);
  return envelope("drift", r.reference(), std::nullopt, std::move(p));
}

DriftReport drift_from_json(const Json& doc) {
  check_envelope(doc, "drift");
  const Json& p = doc.at("payload");
  DriftReport r{.reference_a = reference_from_json(p.at("reference_a")),
                .reference_b = reference_from_json(p.at("reference_b")),
                .loss = parse_loss(p.at("loss").get<std::string>()),
                .kappa = p.at("kappa").get<double>(),
                .delta = p.at("delta").get<double>(),
                .grid_points = p.at("grid").at("points").get<Index>(),
                .grid = parse_grid_strategy(p.at("grid").at("strategy").get<std::string>()),
                .bins = p.at("bins").get<Index>(),
                .similar_marginals_different_explanations =
                    p.at("similar_marginals_different_explanations").get<bool>()};
  if (!p.at("loss_a").is_null()) r.loss_a = p.at("loss_a").get<double>();
  if (!p.at("loss_b").is_null()) r.loss_b = p.at("loss_b").get<double>();
  for (const auto& e : p.at("features")) {
    const auto feature = e.at("feature").get<std::string>();
    auto curve = [&](const char* name, ProfileKind kind, const ReferenceInfo& ref) {
      const Json& c = e.at("curves").at(name);
      Profile pr{.feature = feature,
                 .grid = to_vector(c.at("grid")),
                 .values = to_vector(c.at("values")),
                 .kind = kind,
                 .reference = ref};
      if (c.contains("empty_bins")) pr.empty_bins = c.at("empty_bins").get<std::vector<Index>>();
      return pr;
    };
    r.features.push_back(FeatureDrift{
        .feature = feature,
        .ks = e.at("ks").get<double>(),
        .w1 = e.at("w1").get<double>(),
        .pdp = distance_from(e.at("pdp_distance")),
        .ale = distance_from(e.at("ale_distance")),
        .pdp_a = curve("pdp_a", ProfileKind::kPdp, r.reference_a),
        .pdp_b = curve("pdp_b", ProfileKind::kPdp, r.reference_b),
        .ale_a = curve("ale_a", ProfileKind::kAle, r.reference_a),
        .ale_b = curve("ale_b", ProfileKind::kAle, r.reference_b)});
  }
  return r;
}

}  // namespace refx
