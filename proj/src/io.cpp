#include "pipeboost/io.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "pipeboost/error.hpp"

namespace pipeboost {

using nlohmann::json;

namespace {

[[noreturn]] void corrupt(const std::string& msg) {
  throw Error(Errc::ProfileCorrupt, msg);
}

void expect_keys(const json& j, std::initializer_list<const char*> keys,
                 const std::string& where) {
  if (!j.is_object()) corrupt(where + ": expected an object");
  for (const char* k : keys) {
    if (!j.contains(k)) corrupt(where + ": missing key '" + k + "'");
  }
  for (const auto& [k, _] : j.items()) {
    bool known = false;
    for (const char* allowed : keys) known = known || k == allowed;
    if (!known) corrupt(where + ": unknown key '" + k + "'");
  }
}

const std::string& as_string(const json& j, const std::string& where) {
  if (!j.is_string()) corrupt(where + ": expected a string");
  return j.get_ref<const std::string&>();
}

std::int64_t as_int(const json& j, const std::string& where) {
  if (!j.is_number_integer()) corrupt(where + ": expected an integer");
  return j.get<std::int64_t>();
}

double as_number(const json& j, const std::string& where) {
  if (!j.is_number()) corrupt(where + ": expected a number");
  return j.get<double>();
}

const json& as_array(const json& j, const std::string& where) {
  if (!j.is_array()) corrupt(where + ": expected an array");
  return j;
}

}  // namespace

json profile_to_json(const DeviceProfile& profile) {
  json units = json::array();
  for (const auto& u : profile.units) {
    units.push_back({{"id", u.id}, {"name", u.name}, {"kind", to_string(u.kind)}});
  }
  json models = json::array();
  for (const auto& m : profile.models) {
    json layers = json::array();
    for (const auto& l : m.layers) {
      json kernels = json::array();
      for (const auto& k : l.kernels) {
        json times = json::object();
        for (const auto& [unit, t] : k.time_ms) times[std::to_string(unit)] = t;
        kernels.push_back({{"name", k.name}, {"time_ms", times}});
      }
      layers.push_back({{"name", l.name},
                        {"kernels", kernels},
                        {"features",
                         {{"op_kind", to_string(l.features.op_kind)},
                          {"in_elems", l.features.in_elems},
                          {"out_elems", l.features.out_elems},
                          {"macs", l.features.macs}}}});
    }
    models.push_back({{"name", m.name}, {"layers", layers}});
  }
  return {{"units", units}, {"transfer_ms", profile.transfer_ms}, {"models", models}};
}

DeviceProfile profile_from_json(const json& j) {
  expect_keys(j, {"units", "transfer_ms", "models"}, "profile");
  DeviceProfile profile;
  for (const auto& ju : as_array(j.at("units"), "units")) {
    expect_keys(ju, {"id", "name", "kind"}, "unit");
    ComputeUnit unit;
    unit.id = static_cast<UnitId>(as_int(ju.at("id"), "unit.id"));
    unit.name = as_string(ju.at("name"), "unit.name");
    unit.kind = unit_kind_from_string(as_string(ju.at("kind"), "unit.kind"));
    profile.units.push_back(std::move(unit));
  }
  profile.transfer_ms = as_number(j.at("transfer_ms"), "transfer_ms");
  for (const auto& jm : as_array(j.at("models"), "models")) {
    expect_keys(jm, {"name", "layers"}, "model");
    DnnModel model;
    model.name = as_string(jm.at("name"), "model.name");
    const std::string mwhere = "model '" + model.name + "'";
    for (const auto& jl : as_array(jm.at("layers"), mwhere + ".layers")) {
      expect_keys(jl, {"name", "kernels", "features"}, mwhere + " layer");
      LayerSpec layer;
      layer.name = as_string(jl.at("name"), mwhere + " layer.name");
      const std::string lwhere = mwhere + " layer '" + layer.name + "'";
      for (const auto& jk : as_array(jl.at("kernels"), lwhere + ".kernels")) {
        expect_keys(jk, {"name", "time_ms"}, lwhere + " kernel");
        KernelProfile kernel;
        kernel.name = as_string(jk.at("name"), lwhere + " kernel.name");
        const auto& times = jk.at("time_ms");
        if (!times.is_object()) corrupt(lwhere + " kernel.time_ms: expected an object");
        for (const auto& [key, value] : times.items()) {
          UnitId unit = 0;
          std::istringstream in(key);
          if (!(in >> unit) || !in.eof()) {
            corrupt(lwhere + " kernel.time_ms: bad unit key '" + key + "'");
          }
          kernel.time_ms[unit] = as_number(value, lwhere + " kernel.time_ms");
        }
        layer.kernels.push_back(std::move(kernel));
      }
      const auto& jf = jl.at("features");
      expect_keys(jf, {"op_kind", "in_elems", "out_elems", "macs"}, lwhere + " features");
      layer.features.op_kind = op_kind_from_string(as_string(jf.at("op_kind"), "op_kind"));
      layer.features.in_elems = as_int(jf.at("in_elems"), lwhere + " in_elems");
      layer.features.out_elems = as_int(jf.at("out_elems"), lwhere + " out_elems");
      layer.features.macs = as_int(jf.at("macs"), lwhere + " macs");
      model.layers.push_back(std::move(layer));
    }
    profile.models.push_back(std::move(model));
  }
  validate(profile);
  return profile;
}

void save_profile(const DeviceProfile& profile, const std::filesystem::path& path) {
  write_json(profile_to_json(profile), path);
}

DeviceProfile load_profile(const std::filesystem::path& path) {
  return profile_from_json(read_json(path));
}

json mapping_to_json(const DeviceProfile& profile, const Workload& workload,
                     const Mapping& mapping) {
  validate(mapping, workload, profile);
  return {{"workload", model_names(profile, workload)},
          {"assignments", mapping.assignments}};
}

std::pair<Workload, Mapping> mapping_from_json(const DeviceProfile& profile,
                                               const json& j) {
  if (!j.is_object() || !j.contains("workload") || !j.contains("assignments") ||
      j.size() != 2) {
    throw Error(Errc::InvalidMapping,
                "mapping file must have exactly the keys 'workload' and 'assignments'");
  }
  Workload workload;
  Mapping mapping;
  try {
    const auto names = j.at("workload").get<std::vector<std::string>>();
    workload = workload_from_names(profile, names);
    mapping.assignments = j.at("assignments").get<std::vector<std::vector<UnitId>>>();
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidMapping, std::string("malformed mapping file: ") + e.what());
  }
  validate(mapping, workload, profile);
  return {workload, mapping};
}

void save_mapping(const DeviceProfile& profile, const Workload& workload,
                  const Mapping& mapping, const std::filesystem::path& path) {
  write_json(mapping_to_json(profile, workload, mapping), path);
}

std::pair<Workload, Mapping> load_mapping(const DeviceProfile& profile,
                                          const std::filesystem::path& path) {
  return mapping_from_json(profile, read_json(path));
}

json report_to_json(const ThroughputReport& report) {
  return {{"per_dnn_inf_s", report.per_dnn_inf_s},
          {"per_unit_inf_s", report.per_unit_inf_s},
          {"avg_throughput", report.avg_throughput},
          {"unit_utilization", report.unit_utilization},
          {"theta", report.theta}};
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open '" + path.string() + "' for reading");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(Errc::Io, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const json& j, const std::filesystem::path& path) {
  write_text(j.dump(2) + "\n", path);
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error(Errc::Io, "write to '" + path.string() + "' failed");
}

}  // namespace pipeboost
