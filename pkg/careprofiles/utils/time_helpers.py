# careprofiles/utils/time_helpers.py
"""
Time-related utility functions.

Arrival times are stored as fractional months internally; ETL works in whole
days from the study start to avoid float drift.
"""

from datetime import date, timedelta


DAYS_PER_MONTH = 30.4375
MONTHS_PER_YEAR = 12.0


def days_to_months(days: float) -> float:
    """Convert a day offset to fractional months."""
    return days / DAYS_PER_MONTH


def months_to_days(months: float) -> int:
    """Convert fractional months to the nearest whole day offset."""
    return int(round(months * DAYS_PER_MONTH))


def day_offset(day: date, study_start: date) -> int:
    """Whole days elapsed between the study start and a service date."""
    return (day - study_start).days


def offset_to_date(study_start: date, days: int) -> date:
    """Calendar date of a whole-day offset from the study start."""
    return study_start + timedelta(days=days)


def study_length_months(study_start: date, study_end: date) -> float:
    """Length of the observation window in fractional months."""
    return days_to_months(day_offset(study_end, study_start))


def age_in_years(birth_date: date, on: date) -> int:
    """Completed years of age on a given date."""
    years = on.year - birth_date.year
    if (on.month, on.day) < (birth_date.month, birth_date.day):
        years -= 1
    return years
