#include "vargauss/tasks.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv)
{
    CLI::App app{"Gaussian variational ground states and dynamics for electron-phonon and spin-boson models"};
    app.set_version_flag("--version", "vargauss " + vg::build_id());
    std::string task_text;
    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("task", task_text, "ground, dispersion, quench, spectral, phase-scan or validate")->required();
    app.add_option("--config,-c", config_path, "YAML configuration file");
    app.add_option("--set", overrides, "override a configuration value, e.g. --set polaron.g=1.5")->take_all();
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        const vg::Task task = vg::task_from_string(task_text);
        YAML::Node doc;
        if (!config_path.empty()) doc = vg::load_document(config_path);
        else if (task == vg::Task::Validate) doc = YAML::Node(YAML::NodeType::Map);
        else throw vg::Error(vg::ErrorKind::Config, "config error: --config is required for task " + task_text);
        for (const auto& s : overrides) vg::apply_override(doc, s);
        const vg::RunOutcome out = vg::run(task, doc, std::cout);
        std::cout << "results: " << (out.dir / "result.json").string() << "\n";
        return out.exit_code;
    } catch (const vg::Error& e) {
        std::cerr << e.what() << "\n";
        return e.kind() == vg::ErrorKind::Config ? 1 : 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
