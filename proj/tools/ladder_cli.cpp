// Command-line front end. Builds a JSON configuration from the flags and
// hands it to the C interface of the library.

#include "ladder_c.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Flags {
    std::string L = "2";
    std::vector<double> eps;
    std::vector<double> mu;
    std::string cls = "sym";
    double omega_max = 0.0;
    int ntheta = 0;
    double h = 0.0;
    int cells = 0;
    int nev = 0;
    int gap = 0;
    std::vector<double> window;
    std::string out;
    unsigned long long seed = 0;
    double tol = 0.0;
    std::string study = "all";
    std::string config_file;
    bool dump_modes = false;
    bool print_config = false;
};

void add_common(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--L", f.L, "ladder height: 2, 1/2, 10pi/7");
    cmd->add_option("--eps", f.eps, "rung thickness list")->delimiter(',');
    cmd->add_option("--mu", f.mu, "central rung width factor list")->delimiter(',');
    cmd->add_option("--class", f.cls, "sym or antisym");
    cmd->add_option("--omega-max", f.omega_max, "upper frequency");
    cmd->add_option("--ntheta", f.ntheta, "quasimomentum grid size");
    cmd->add_option("--h", f.h, "mesh size (default eps/4)");
    cmd->add_option("--cells", f.cells, "supercell cells on each side");
    cmd->add_option("--nev", f.nev, "eigenvalues per quasimomentum");
    cmd->add_option("--gap", f.gap, "gap index (1-based) for localized runs");
    cmd->add_option("--window", f.window, "omega window lo,hi")->delimiter(',')->expected(2);
    cmd->add_option("--out", f.out, "output prefix; CSV goes to stdout when absent");
    cmd->add_option("--seed", f.seed, "Lanczos start vector seed");
    cmd->add_option("--tol", f.tol, "eigensolver tolerance");
    cmd->add_option("--config", f.config_file, "JSON config to start from");
    cmd->add_flag("--print-config", f.print_config, "print the resolved config and exit");
}

nlohmann::json build_config(const std::string& command, CLI::App* cmd, const Flags& f)
{
    nlohmann::json j = nlohmann::json::object();
    if (!f.config_file.empty()) {
        std::ifstream in(f.config_file);
        if (!in)
            throw std::runtime_error("cannot read " + f.config_file);
        j = nlohmann::json::parse(in);
        if (j.contains("config"))
            j = j["config"];
    }
    auto given = [&](const char* name) {
        const CLI::Option* opt = cmd->get_option_no_throw(name);
        return opt && opt->count() > 0;
    };
    j["command"] = command;
    if (given("--L") || !j.contains("L"))
        j["L"] = f.L;
    if (given("--eps"))
        j["eps"] = f.eps;
    if (given("--mu"))
        j["mu"] = f.mu;
    if (given("--class") || !j.contains("class"))
        j["class"] = f.cls;
    if (given("--omega-max"))
        j["omega_max"] = f.omega_max;
    if (given("--ntheta"))
        j["ntheta"] = f.ntheta;
    if (given("--h"))
        j["h"] = f.h;
    if (given("--cells"))
        j["cells"] = f.cells;
    if (given("--nev"))
        j["nev"] = f.nev;
    if (given("--gap"))
        j["gap"] = f.gap;
    if (given("--window"))
        j["window"] = f.window;
    if (given("--out"))
        j["out"] = f.out;
    if (given("--seed"))
        j["seed"] = f.seed;
    if (given("--tol"))
        j["tol"] = f.tol;
    if (given("--study"))
        j["study"] = f.study;
    if (given("--dump-modes"))
        j["dump_modes"] = f.dump_modes;
    return j;
}

bool write_file(const std::string& path, const std::string& text)
{
    std::ofstream os(path, std::ios::binary);
    os << text;
    if (!os) {
        std::cerr << "error: cannot write " << path << '\n';
        return false;
    }
    return true;
}

int report_failure(int status)
{
    std::cerr << "error";
    const std::string field = ladder_last_error_field();
    if (!field.empty())
        std::cerr << " [" << field << "]";
    std::cerr << ": " << ladder_last_error() << '\n';
    if (status == LADDER_ERR_CONFIG || status == LADDER_ERR_ARGUMENT)
        return 2;
    return 3;
}

int execute(const std::string& command, CLI::App* cmd, const Flags& f)
{
    nlohmann::json cfg;
    try {
        cfg = build_config(command, cmd, f);
    } catch (const std::exception& e) {
        std::cerr << "error [config]: " << e.what() << '\n';
        return 2;
    }
    const std::string text = cfg.dump();
    ladder_run* run = nullptr;
    if (f.print_config) {
        const int status = ladder_config_resolve(text.c_str(), &run);
        if (status != LADDER_OK)
            return report_failure(status);
        std::cout << ladder_run_report(run) << '\n';
        ladder_run_free(run);
        return 0;
    }
    const int status = ladder_run_config(text.c_str(), &run);
    if (status != LADDER_OK)
        return report_failure(status);

    int code = 0;
    if (f.out.empty()) {
        std::cout << ladder_run_csv(run);
    } else {
        bool ok = write_file(f.out + ".csv", ladder_run_csv(run)) &&
                  write_file(f.out + ".json", ladder_run_report(run));
        for (size_t i = 0; i < ladder_run_attachment_count(run); ++i)
            ok = ok && write_file(f.out + "_" + ladder_run_attachment_name(run, i),
                                  ladder_run_attachment_data(run, i));
        if (!ok)
            code = 3;
    }
    const int passed = ladder_run_passed(run);
    if (passed >= 0)
        std::cerr << "convergence checks: " << (passed ? "pass" : "FAIL") << '\n';
    ladder_run_free(run);
    return code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Spectra of periodic thin ladders and their quantum-graph limit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ladder_version()));
    Flags f;

    struct Leaf {
        std::string command;
        CLI::App* app;
    };
    std::vector<Leaf> leaves;

    auto* graph = app.add_subcommand("graph", "closed-form quantum graph spectra");
    graph->require_subcommand(1);
    for (const char* name : {"bands", "gaps", "eigs"})
        leaves.push_back({std::string("graph ") + name,
                          graph->add_subcommand(name, std::string("graph ") + name)});

    auto* fem = app.add_subcommand("fem", "finite elements on the thin ladder");
    fem->require_subcommand(1);
    for (const char* name : {"bands", "localized"})
        leaves.push_back({std::string("fem ") + name,
                          fem->add_subcommand(name, std::string("fem ") + name)});

    auto* study = app.add_subcommand("study", "convergence studies against the graph limit");
    study->require_subcommand(1);
    leaves.push_back({"study convergence", study->add_subcommand("convergence",
                                                                  "eps sweeps with slope fits")});

    for (auto& leaf : leaves) {
        // -h would clash with the mesh-size flag.
        leaf.app->set_help_flag("--help", "print this help message and exit");
        add_common(leaf.app, f);
        if (leaf.command == "fem localized")
            leaf.app->add_flag("--dump-modes", f.dump_modes, "write every mode as a mesh file");
        if (leaf.command == "study convergence")
            leaf.app->add_option("--study", f.study, "bands, eigs, quasimode, flatband or all");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    for (auto& leaf : leaves)
        if (leaf.app->parsed())
            return execute(leaf.command, leaf.app, f);
    return 2;
}
