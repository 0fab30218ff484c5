#include "peaklab/io.hpp"
#include "peaklab/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace peaklab {
namespace io {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("write_csv: cannot open " + path);
    for (size_t i = 0; i < table.header.size(); ++i)
        out << (i ? "," : "") << table.header[i];
    out << "\n";
    for (const auto& row : table.rows) {
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt17(row[i]);
        out << "\n";
    }
    if (!out) throw validation_error("write_csv: write failed for " + path);
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("read_csv: cannot open " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw validation_error("read_csv: empty file " + path);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ',')) t.header.push_back(cell);
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw validation_error("read_csv: bad number '" + cell + "' in " + path);
            }
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw validation_error("write_json: cannot open " + path);
    out << j.dump(2) << "\n";
    if (!out) throw validation_error("write_json: write failed for " + path);
}

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw validation_error("read_json: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw validation_error("read_json: parse failure in " + path + ": " + e.what());
    }
    return j;
}

void save_profile(const PeakProfile& p, const std::string& base, uint64_t seed) {
    CsvTable t;
    t.header = {"n", "a_n", "alpha_n"};
    for (int n = p.win.lo; n <= p.win.hi; ++n)
        t.rows.push_back({double(n), p.a_at(n), p.alpha_at(n)});
    write_csv(base + ".csv", t);

    nlohmann::json j;
    j["A"] = p.A;
    j["rho"] = p.rho;
    j["mass"] = p.mass;
    j["Theta"] = p.Theta;
    j["window"] = {{"lo", p.win.lo}, {"hi", p.win.hi}};
    j["kernel"] = {{"alpha", p.kernel.alpha},
                   {"beta", p.kernel.beta},
                   {"k0", p.kernel.k0},
                   {"gamma0", p.kernel.gamma0}};
    j["seed"] = seed;
    write_json(base + ".json", j);
}

PeakProfile load_profile(const std::string& base) {
    const nlohmann::json j = read_json(base + ".json");
    KernelModel km;
    km.alpha = j.at("kernel").at("alpha").get<double>();
    km.beta = j.at("kernel").at("beta").get<double>();
    km.k0 = j.at("kernel").at("k0").get<double>();
    km.gamma0 = j.at("kernel").at("gamma0").get<double>();
    const double rho = j.at("rho").get<double>();
    km.rho = rho;
    const Window win{j.at("window").at("lo").get<int>(), j.at("window").at("hi").get<int>()};
    PeakProfile p = profile_from_A(km, j.at("A").get<double>(), rho, win);

    const CsvTable t = read_csv(base + ".csv");
    if (t.rows.size() != size_t(win.size()))
        throw validation_error("load_profile: row count does not match the header window");
    for (const auto& row : t.rows) {
        if (row.size() != 3) throw validation_error("load_profile: malformed row");
        const int n = int(std::lround(row[0]));
        if (!win.contains(n)) throw validation_error("load_profile: site outside window");
        const double ar = p.a_at(n);
        if (std::abs(row[1] - ar) > 4e-16 * std::max(std::abs(ar), 1e-300) &&
            row[1] != ar)
            throw validation_error("load_profile: CSV amplitude disagrees with header "
                                   "reconstruction at site " + std::to_string(n));
    }
    return p;
}

} // namespace io
} // namespace peaklab
