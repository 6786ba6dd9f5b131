//! Proleptic Gregorian calendar arithmetic for the date builtins.
//!
//! Offsets follow relativedelta order: whole years first, then months with the
//! day-of-month clamped into the target month, then weeks and days as an exact
//! day shift.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CivilDate {
    year: i64,
    month: u8,
    day: u8,
}

/// A calendar offset. Fields apply in struct order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DateDelta {
    pub years: i64,
    pub months: i64,
    pub weeks: i64,
    pub days: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DateError {
    #[error("invalid date {0}-{1}-{2}")]
    InvalidDate(i64, i64, i64),
    #[error("unsupported strftime token %{0}")]
    BadFormatToken(char),
    #[error("dangling % at end of format string")]
    DanglingPercent,
}

pub fn is_leap_year(y: i64) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

pub fn days_in_month(y: i64, m: u8) -> u8 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            if is_leap_year(y) {
                29
            } else {
                28
            }
        }
        _ => unreachable!("month out of range"),
    }
}

impl CivilDate {
    pub fn new(year: i64, month: i64, day: i64) -> Result<CivilDate, DateError> {
        if !(1..=12).contains(&month) {
            return Err(DateError::InvalidDate(year, month, day));
        }
        let m = month as u8;
        if day < 1 || day > days_in_month(year, m) as i64 {
            return Err(DateError::InvalidDate(year, month, day));
        }
        Ok(CivilDate { year, month: m, day: day as u8 })
    }

    pub fn year(&self) -> i64 {
        self.year
    }
    pub fn month(&self) -> u8 {
        self.month
    }
    pub fn day(&self) -> u8 {
        self.day
    }

    /// Days since 1970-01-01.
    pub fn to_day_number(&self) -> i64 {
        let y = if self.month <= 2 { self.year - 1 } else { self.year };
        let era = if y >= 0 { y } else { y - 399 } / 400;
        let yoe = y - era * 400;
        let mp = (i64::from(self.month) + 9) % 12;
        let doy = (153 * mp + 2) / 5 + i64::from(self.day) - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    pub fn from_day_number(days: i64) -> CivilDate {
        let z = days + 719_468;
        let era = if z >= 0 { z } else { z - 146_096 } / 146_097;
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146_096) / 365;
        let y = yoe + era * 400;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let d = (doy - (153 * mp + 2) / 5 + 1) as u8;
        let m = if mp < 10 { mp + 3 } else { mp - 9 } as u8;
        let year = if m <= 2 { y + 1 } else { y };
        CivilDate { year, month: m, day: d }
    }

    pub fn add_delta(&self, delta: &DateDelta) -> CivilDate {
        // Years and months move along the month grid with day clamping.
        let total_months = self.year * 12 + i64::from(self.month) - 1
            + delta.years * 12
            + delta.months;
        let year = total_months.div_euclid(12);
        let month = (total_months.rem_euclid(12) + 1) as u8;
        let day = self.day.min(days_in_month(year, month));
        let stepped = CivilDate { year, month, day };
        let shift = delta.weeks * 7 + delta.days;
        if shift == 0 {
            stepped
        } else {
            CivilDate::from_day_number(stepped.to_day_number() + shift)
        }
    }

    pub fn sub_delta(&self, delta: &DateDelta) -> CivilDate {
        self.add_delta(&DateDelta {
            years: -delta.years,
            months: -delta.months,
            weeks: -delta.weeks,
            days: -delta.days,
        })
    }

    /// Day of week by Zeller's congruence, 0 = Monday .. 6 = Sunday.
    pub fn weekday(&self) -> u8 {
        let (mut y, mut m) = (self.year, i64::from(self.month));
        if m < 3 {
            m += 12;
            y -= 1;
        }
        let q = i64::from(self.day);
        let k = y.rem_euclid(100);
        let j = y.div_euclid(100);
        // h: 0 = Saturday, 1 = Sunday, .. 6 = Friday.
        let h = (q + (13 * (m + 1)) / 5 + k + k / 4 + j / 4 + 5 * j).rem_euclid(7);
        ((h + 5) % 7) as u8
    }

    pub fn weekday_name(&self) -> &'static str {
        const NAMES: [&str; 7] = [
            "Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday",
        ];
        NAMES[self.weekday() as usize]
    }

    /// Formats with the supported tokens %m, %d, %Y, %A, and %% only.
    pub fn strftime(&self, fmt: &str) -> Result<String, DateError> {
        let mut out = String::new();
        let mut chars = fmt.chars();
        while let Some(c) = chars.next() {
            if c != '%' {
                out.push(c);
                continue;
            }
            match chars.next() {
                Some('m') => out.push_str(&format!("{:02}", self.month)),
                Some('d') => out.push_str(&format!("{:02}", self.day)),
                Some('Y') => out.push_str(&format!("{:04}", self.year)),
                Some('A') => out.push_str(self.weekday_name()),
                Some('%') => out.push('%'),
                Some(other) => return Err(DateError::BadFormatToken(other)),
                None => return Err(DateError::DanglingPercent),
            }
        }
        Ok(out)
    }
}

impl fmt::Display for CivilDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

impl DateDelta {
    pub fn checked_add(&self, other: &DateDelta) -> Option<DateDelta> {
        Some(DateDelta {
            years: self.years.checked_add(other.years)?,
            months: self.months.checked_add(other.months)?,
            weeks: self.weeks.checked_add(other.weeks)?,
            days: self.days.checked_add(other.days)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn day_number_round_trip() {
        for dn in [-1_000_000_i64, -1, 0, 1, 180_000, 2_000_000] {
            let d = CivilDate::from_day_number(dn);
            assert_eq!(d.to_day_number(), dn);
        }
    }

    #[test]
    fn known_dates() {
        let epoch = CivilDate::new(1970, 1, 1).unwrap();
        assert_eq!(epoch.to_day_number(), 0);
        assert_eq!(epoch.weekday_name(), "Thursday");
        let d = CivilDate::new(2021, 4, 30).unwrap();
        assert_eq!(d.weekday_name(), "Friday");
        assert_eq!(d.strftime("%m/%d/%Y").unwrap(), "04/30/2021");
    }

    #[test]
    fn month_clamping() {
        let jan31 = CivilDate::new(2021, 1, 31).unwrap();
        let plus_month = jan31.add_delta(&DateDelta { months: 1, ..Default::default() });
        assert_eq!(plus_month, CivilDate::new(2021, 2, 28).unwrap());
        let leap = CivilDate::new(2020, 1, 31).unwrap();
        let plus_month = leap.add_delta(&DateDelta { months: 1, ..Default::default() });
        assert_eq!(plus_month, CivilDate::new(2020, 2, 29).unwrap());
        // Clamping happens before the day shift.
        let mixed = jan31.add_delta(&DateDelta { months: 1, days: 1, ..Default::default() });
        assert_eq!(mixed, CivilDate::new(2021, 3, 1).unwrap());
    }

    #[test]
    fn year_then_month_order() {
        // 2020-02-29 + 1 year clamps to 2021-02-28.
        let leap_day = CivilDate::new(2020, 2, 29).unwrap();
        let next = leap_day.add_delta(&DateDelta { years: 1, ..Default::default() });
        assert_eq!(next, CivilDate::new(2021, 2, 28).unwrap());
    }

    #[test]
    fn invalid_dates_rejected() {
        assert!(CivilDate::new(2021, 2, 30).is_err());
        assert!(CivilDate::new(2021, 13, 1).is_err());
        assert!(CivilDate::new(2021, 0, 1).is_err());
        assert!(CivilDate::new(2100, 2, 29).is_err());
        assert!(CivilDate::new(2000, 2, 29).is_ok());
    }

    #[test]
    fn strftime_rejects_unknown_tokens() {
        let d = CivilDate::new(2021, 4, 30).unwrap();
        assert_eq!(d.strftime("%A, %m/%d/%Y").unwrap(), "Friday, 04/30/2021");
        assert_eq!(d.strftime("100%%").unwrap(), "100%");
        assert!(matches!(d.strftime("%b"), Err(DateError::BadFormatToken('b'))));
        assert!(matches!(d.strftime("trailing%"), Err(DateError::DanglingPercent)));
    }
}
