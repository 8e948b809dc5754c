use std::str::FromStr;

/// `start:stop:count[:log]`, or a single value.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub log: bool,
}

impl GridSpec {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let t = k as f64 / n;
                if k == 0 {
                    self.start
                } else if k == self.count - 1 {
                    self.stop
                } else if self.log {
                    (self.start.ln() + t * (self.stop.ln() - self.start.ln())).exp()
                } else {
                    self.start + t * (self.stop - self.start)
                }
            })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("`{p}` is not a number in grid `{s}`"));
        let spec = match parts.as_slice() {
            [v] => {
                let v = num(v)?;
                GridSpec { start: v, stop: v, count: 1, log: false }
            }
            [a, b, n] | [a, b, n, _] => {
                let count = n
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| format!("`{n}` is not a point count in grid `{s}`"))?;
                let log = match parts.get(3).map(|m| m.trim()) {
                    None | Some("lin") => false,
                    Some("log") => true,
                    Some(m) => return Err(format!("unknown spacing `{m}` in grid `{s}` (use log or lin)")),
                };
                GridSpec { start: num(a)?, stop: num(b)?, count, log }
            }
            _ => return Err(format!("grid `{s}` is not start:stop:count[:log]")),
        };
        if !(spec.start.is_finite() && spec.stop.is_finite()) {
            return Err(format!("grid `{s}` has non-finite bounds"));
        }
        if spec.count == 0 {
            return Err(format!("grid `{s}` has zero points"));
        }
        if spec.count > 1 && spec.stop <= spec.start {
            return Err(format!("grid `{s}` must increase"));
        }
        if spec.log && spec.start <= 0.0 {
            return Err(format!("log grid `{s}` needs positive bounds"));
        }
        Ok(spec)
    }
}

/// `name=start:stop:count[:log]` for sweeps.
#[derive(Debug, Clone, PartialEq)]
pub struct VarySpec {
    pub name: String,
    pub grid: GridSpec,
}

impl FromStr for VarySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (name, grid) = s.split_once('=').ok_or_else(|| format!("`{s}` is not name=grid"))?;
        Ok(VarySpec {
            name: name.trim().to_string(),
            grid: grid.parse()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid_hits_endpoints() {
        let g: GridSpec = "1e-22:1e-19:4:log".parse().unwrap();
        let v = g.values();
        assert_eq!(v.len(), 4);
        assert_eq!(v[0], 1e-22);
        assert_eq!(v[3], 1e-19);
        assert!((v[1] / 1e-21 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_value() {
        assert_eq!("0.02".parse::<GridSpec>().unwrap().values(), vec![0.02]);
    }

    #[test]
    fn rejects_bad_specs() {
        for s in ["1:2", "1:0:3", "0:1:3:log", "a:b:3", "1:2:0", "1:2:3:cubic"] {
            assert!(s.parse::<GridSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn vary_spec() {
        let v: VarySpec = "gamma=0.01:0.1:10".parse().unwrap();
        assert_eq!(v.name, "gamma");
        assert_eq!(v.grid.count, 10);
    }
}
