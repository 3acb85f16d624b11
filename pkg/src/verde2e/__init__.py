"""Two-echelon location-routing with eco-conscious customer behaviour."""
from .core import (
    Customer, EmissionIntervals, Instance, Node, Route, Satellite, Scenario, Solution, Vehicle,
    customer_trip_emissions, eligible_satellites, fcr, load_instance, stop_emissions,
)

__version__ = "0.1.0"
