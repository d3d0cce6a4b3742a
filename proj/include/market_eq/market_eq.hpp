#pragma once

#include "market_eq/adaptive.hpp"
#include "market_eq/bench.hpp"
#include "market_eq/driver.hpp"
#include "market_eq/errors.hpp"
#include "market_eq/exchange.hpp"
#include "market_eq/instance.hpp"
#include "market_eq/io.hpp"
#include "market_eq/kkt.hpp"
#include "market_eq/oracle.hpp"
#include "market_eq/pdhcg.hpp"
#include "market_eq/pdhg.hpp"
#include "market_eq/report.hpp"
#include "market_eq/section_search.hpp"
#include "market_eq/sparse.hpp"
