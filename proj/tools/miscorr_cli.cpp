// miscorr <command> [--config FILE] [--<key> VALUE ...]
//
// Settings are applied in order: config file, then flags. MISCORR_THREADS,
// when set, overrides --n-parallel. Exit codes: 0 ok, 1 usage or
// configuration error, 2 the fit did not converge (reports still written).

#include <miscorr/run.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

namespace
{

std::string flag_name(std::string key)
{
    std::replace(key.begin(), key.end(), '_', '-');
    return "--" + key;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Regression with a misclassified binary outcome or mediator"};
    app.set_version_flag("--version", std::string(miscorr::kVersion));
    std::string command;
    std::string config_path;
    app.add_option("command", command, "one of: " + miscorr::detail::join(miscorr::known_commands()))->required();
    app.add_option("--config", config_path, "flat key = value configuration file");

    const std::vector<std::string> keys = miscorr::config_keys();
    std::vector<std::string> values(keys.size());
    std::vector<CLI::Option*> options;
    for (std::size_t k = 0; k < keys.size(); ++k) {
        if (keys[k] == "command") {
            options.push_back(nullptr);
            continue;
        }
        options.push_back(app.add_option(flag_name(keys[k]), values[k], "sets '" + keys[k] + "'"));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        miscorr::AnalysisConfig cfg;
        if (!config_path.empty()) cfg.read_file(config_path);
        cfg.set("command", command);
        for (std::size_t k = 0; k < keys.size(); ++k)
            if (options[k] && options[k]->count() > 0) cfg.set(keys[k], values[k]);
        if (const char* env = std::getenv("MISCORR_THREADS"); env && *env) cfg.set("n_parallel", env);

        const int code = miscorr::run(cfg, std::cerr);
        if (code == 2) std::cerr << "warning: the fit did not converge; reports were written\n";
        return code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
