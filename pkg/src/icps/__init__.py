"""Stability of matching markets when deviating pairs can buy credible tests."""

from .information import (
    NULL_MENU,
    NULL_TEST,
    DeviationQuote,
    InfeasibleTest,
    SequentialProtocol,
    StoppingPolicy,
    Test,
    TestMenu,
    blocking_threshold,
    deviation_value,
    menu_threshold,
    option_value,
    sequential_threshold,
    sequential_value,
)
from .market import (
    Agent,
    InfeasibleCorrelation,
    JointTypeDistribution,
    Market,
    Matching,
    PairSurplusDistribution,
    SurplusTable,
    TypeGrade,
    assortative_matching,
    build_joint_distribution,
    enumerate_matchings,
    expected_pair_surplus,
    expected_welfare,
    hl_market,
    is_positively_assortative,
    pair_surplus_distribution,
)
from .solver import (
    StableSetReport,
    lone_wolf_report,
    max_welfare_matching,
    refinement_magnitude,
    stable_matchings,
    uniqueness_report,
)
from .stability import (
    Allocation,
    BlockingCertificate,
    Concept,
    NtuUtilityTable,
    check_individual_rationality,
    find_blocking_pair,
    find_ntu_blocking_pair,
    improvement_path,
    supporting_payoffs,
)

__version__ = "0.1.0"
