#pragma once

#include "gerbecalc/fixtures.hpp"

namespace fixtures = gerbecalc::fixtures;
