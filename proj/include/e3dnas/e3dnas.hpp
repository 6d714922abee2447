#pragma once

#include "e3dnas/arch.hpp"
#include "e3dnas/arch_json.hpp"
#include "e3dnas/cost.hpp"
#include "e3dnas/entropy.hpp"
#include "e3dnas/io.hpp"
#include "e3dnas/oracle.hpp"
#include "e3dnas/presets.hpp"
#include "e3dnas/search.hpp"
