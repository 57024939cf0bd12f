#pragma once

#include "panelqlm/dgp.hpp"

#include <iosfwd>
#include <string>

// Panel interchange formats. Long CSV has header "id,t,y" with one row per
// observation; wide CSV is the dense N x T value matrix, one individual per
// row. Values round-trip at 17 significant digits.

namespace panelqlm {

void write_long_csv(std::ostream& os, const PanelData& data);
void write_wide_csv(std::ostream& os, const PanelData& data);
PanelData read_long_csv(std::istream& is);
PanelData read_wide_csv(std::istream& is);

void write_panel_csv(const std::string& path, const PanelData& data, bool wide = false);
PanelData read_panel_csv(const std::string& path, bool wide = false);

}  // namespace panelqlm
