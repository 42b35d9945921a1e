use serde::{Deserialize, Serialize};

use super::SimError;

/// A conductance between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductance {
    pub a: usize,
    pub b: usize,
    pub siemens: f64,
}

/// Linear resistive network driven by a 1 V source against ground.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistiveNetwork {
    pub node_count: usize,
    pub elements: Vec<Conductance>,
    pub source: usize,
    pub ground: usize,
    pub output: usize,
}

impl ResistiveNetwork {
    /// Node voltages by nodal analysis. Nodes with no path to the source or
    /// ground are left at `NaN`; an output node in that situation is an error.
    pub fn solve(&self) -> Result<Vec<f64>, SimError> {
        let n = self.node_count;
        for e in &self.elements {
            if e.a >= n || e.b >= n || !(e.siemens.is_finite() && e.siemens >= 0.0) {
                return Err(SimError::Network(format!("invalid element {e:?}")));
            }
        }
        // reachability from the fixed nodes through nonzero conductances
        let mut anchored = vec![false; n];
        anchored[self.source] = true;
        anchored[self.ground] = true;
        let mut changed = true;
        while changed {
            changed = false;
            for e in self.elements.iter().filter(|e| e.siemens > 0.0) {
                if anchored[e.a] != anchored[e.b] {
                    anchored[e.a] = true;
                    anchored[e.b] = true;
                    changed = true;
                }
            }
        }
        if !anchored[self.output] {
            return Err(SimError::Network("output node is floating".into()));
        }

        let mut voltage = vec![f64::NAN; n];
        voltage[self.source] = 1.0;
        voltage[self.ground] = 0.0;
        let unknowns: Vec<usize> = (0..n)
            .filter(|&i| anchored[i] && i != self.source && i != self.ground)
            .collect();
        let mut index = vec![usize::MAX; n];
        for (k, &node) in unknowns.iter().enumerate() {
            index[node] = k;
        }
        let m = unknowns.len();
        let mut g = vec![vec![0.0; m + 1]; m];
        for e in &self.elements {
            if e.a == e.b || e.siemens == 0.0 {
                continue;
            }
            for (p, q) in [(e.a, e.b), (e.b, e.a)] {
                let row = index[p];
                if row == usize::MAX {
                    continue;
                }
                g[row][row] += e.siemens;
                match index[q] {
                    usize::MAX => g[row][m] += e.siemens * voltage[q],
                    col => g[row][col] -= e.siemens,
                }
            }
        }
        let x = gauss_solve(g).ok_or_else(|| SimError::Network("singular nodal matrix".into()))?;
        for (k, &node) in unknowns.iter().enumerate() {
            voltage[node] = x[k];
        }
        Ok(voltage)
    }

    /// Output voltage with the source at 1 V.
    pub fn dc_ratio(&self) -> Result<f64, SimError> {
        Ok(self.solve()?[self.output])
    }
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn gauss_solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let m = a.len();
    for col in 0..m {
        let pivot = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        let (head, tail) = a.split_at_mut(col + 1);
        let pivot_row = &head[col];
        for row in tail.iter_mut() {
            let f = row[col] / pivot_row[col];
            if f != 0.0 {
                for (r, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                    *r -= f * p;
                }
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][m] - s) / a[row][row];
    }
    Some(x)
}

/// Named-node network description with optionally switched elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub nodes: Vec<String>,
    pub source: String,
    pub ground: String,
    pub output: String,
    pub elements: Vec<ElementSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementSpec {
    pub from: String,
    pub to: String,
    /// On-conductance in units of the transistor unit conductance.
    pub conductance: f64,
    /// Switch field that connects this element; always connected if absent.
    #[serde(default)]
    pub switch: Option<String>,
}

impl NetworkSpec {
    pub fn node_index(&self, name: &str) -> Result<usize, SimError> {
        self.nodes
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| SimError::Network(format!("unknown node `{name}`")))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let s = self.node_index(&self.source)?;
        let g = self.node_index(&self.ground)?;
        self.node_index(&self.output)?;
        if s == g {
            return Err(SimError::Network("source and ground must differ".into()));
        }
        for e in &self.elements {
            self.node_index(&e.from)?;
            self.node_index(&e.to)?;
            if !(e.conductance.is_finite() && e.conductance > 0.0) {
                return Err(SimError::Network(format!(
                    "element {}-{} needs positive conductance",
                    e.from, e.to
                )));
            }
        }
        Ok(())
    }

    /// Realizes the network, keeping elements for which `connected` holds.
    pub fn realize(
        &self,
        mut connected: impl FnMut(&ElementSpec) -> Option<f64>,
    ) -> Result<ResistiveNetwork, SimError> {
        let mut elements = Vec::new();
        for e in &self.elements {
            if let Some(scale) = connected(e) {
                elements.push(Conductance {
                    a: self.node_index(&e.from)?,
                    b: self.node_index(&e.to)?,
                    siemens: e.conductance * scale,
                });
            }
        }
        Ok(ResistiveNetwork {
            node_count: self.nodes.len(),
            elements,
            source: self.node_index(&self.source)?,
            ground: self.node_index(&self.ground)?,
            output: self.node_index(&self.output)?,
        })
    }
}
