#include "kinfer/dataset_io.hpp"

#include <charconv>
#include <stdexcept>

#include "kinfer/csv.hpp"

namespace kinfer {

namespace {

std::string experiment_file(std::size_t k) { return "experiment_" + std::to_string(k + 1) + ".csv"; }

double to_double(const std::string& s, const std::string& where)
{
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::runtime_error("malformed number '" + s + "' in " + where);
    return v;
}

}  // namespace

std::string experiment_csv(const Dataset& ds, std::size_t experiment)
{
    const auto& e = ds.experiments.at(experiment);
    csv::Table t;
    t.header.push_back("t");
    for (const auto& s : ds.species)
        t.header.push_back(s);
    for (std::size_t i = 0; i < e.times.size(); ++i) {
        std::vector<std::string> row{csv::number(e.times[i])};
        for (std::size_t s = 0; s < ds.species.size(); ++s)
            row.push_back(csv::number(e.conc(i, s)));
        t.add(std::move(row));
    }
    return t.str();
}

nlohmann::ordered_json dataset_manifest(const Dataset& ds)
{
    nlohmann::ordered_json j;
    j["system"] = ds.system;
    j["species"] = ds.species;
    j["stoich"] = ds.stoich;
    j["sigma"] = ds.noise.std_dev;
    j["seed"] = ds.noise.seed;
    auto exps = nlohmann::ordered_json::array();
    for (std::size_t k = 0; k < ds.experiments.size(); ++k) {
        const auto& d = ds.experiments[k].design;
        nlohmann::ordered_json e;
        e["file"] = experiment_file(k);
        e["initial"] = d.initial;
        e["window"] = {d.t0, d.tf};
        e["n_t"] = d.n_samples;
        exps.push_back(std::move(e));
    }
    j["experiments"] = std::move(exps);
    return j;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds)
{
    ds.validate();
    std::filesystem::create_directories(dir);
    for (std::size_t k = 0; k < ds.experiments.size(); ++k)
        csv::write_file(dir / experiment_file(k), experiment_csv(ds, k));
    csv::write_file(dir / "manifest.json", dataset_manifest(ds).dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir)
{
    const auto manifest_path = dir / "manifest.json";
    if (!std::filesystem::exists(manifest_path))
        throw std::runtime_error("no manifest.json in '" + dir.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_file(manifest_path));
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest.json: " + std::string(e.what()));
    }
    Dataset ds;
    try {
        ds.system = j.at("system").get<std::string>();
        ds.species = j.at("species").get<std::vector<std::string>>();
        ds.stoich = j.at("stoich").get<std::vector<double>>();
        ds.noise.std_dev = j.at("sigma").get<double>();
        ds.noise.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& e : j.at("experiments")) {
            ExperimentData data;
            data.design.initial = e.at("initial").get<std::vector<double>>();
            data.design.t0 = e.at("window").at(0).get<double>();
            data.design.tf = e.at("window").at(1).get<double>();
            data.design.n_samples = e.at("n_t").get<std::size_t>();
            const auto file = dir / e.at("file").get<std::string>();
            const auto rows = csv::parse(csv::read_file(file));
            if (rows.empty() || rows[0].size() != ds.species.size() + 1)
                throw std::runtime_error("unexpected header in " + file.string());
            data.conc = Matrix(rows.size() - 1, ds.species.size());
            for (std::size_t r = 1; r < rows.size(); ++r) {
                if (rows[r].size() != ds.species.size() + 1)
                    throw std::runtime_error("ragged row in " + file.string());
                data.times.push_back(to_double(rows[r][0], file.string()));
                for (std::size_t s = 0; s < ds.species.size(); ++s)
                    data.conc(r - 1, s) = to_double(rows[r][s + 1], file.string());
            }
            ds.experiments.push_back(std::move(data));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed manifest.json: " + std::string(e.what()));
    }
    try {
        ds.validate();
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(e.what());
    }
    return ds;
}

}  // namespace kinfer
