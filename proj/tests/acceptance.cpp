// One line per acceptance criterion; exit status 0 iff all pass.
#include "specop/acceptance.hpp"

#include <iostream>

int main() {
    specop::AcceptanceConfig cfg;
    int failed = 0;
    specop::run_acceptance(cfg, [&](const specop::CriterionResult& r) {
        std::cout << specop::summary_line(r) << std::endl;
        if (!r.pass()) ++failed;
    });
    std::cout << (10 - failed) << "/10 criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
