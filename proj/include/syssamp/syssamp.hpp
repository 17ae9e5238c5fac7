#pragma once

#include "syssamp/error.hpp"
#include "syssamp/moments.hpp"
#include "syssamp/design.hpp"
#include "syssamp/estimate.hpp"
#include "syssamp/theory.hpp"
#include "syssamp/oracle.hpp"
#include "syssamp/table.hpp"
#include "syssamp/mc.hpp"
#include "syssamp/report.hpp"
