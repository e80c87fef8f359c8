//! Minimal robots.txt support: `User-agent`, `Allow` and `Disallow` lines,
//! longest matching rule wins, `Allow` wins ties.

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RobotsRules {
    rules: Vec<(bool, String)>,
}

impl RobotsRules {
    pub fn allow_all() -> Self {
        Self::default()
    }

    /// Uses the group naming `agent` if one exists, else the `*` group.
    pub fn parse(body: &str, agent: &str) -> Self {
        let agent = agent.to_lowercase();
        // (user agents, [(allow, path prefix)])
        type Group = (Vec<String>, Vec<(bool, String)>);
        let mut groups: Vec<Group> = Vec::new();
        let mut collecting_agents = false;
        for line in body.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            let Some((field, value)) = line.split_once(':') else { continue };
            let field = field.trim().to_lowercase();
            let value = value.trim();
            match field.as_str() {
                "user-agent" => {
                    if !collecting_agents {
                        groups.push((Vec::new(), Vec::new()));
                    }
                    collecting_agents = true;
                    if let Some(g) = groups.last_mut() {
                        g.0.push(value.to_lowercase());
                    }
                }
                "allow" | "disallow" => {
                    collecting_agents = false;
                    if let Some(g) = groups.last_mut() {
                        if !value.is_empty() {
                            g.1.push((field == "allow", value.to_owned()));
                        }
                    }
                }
                _ => {}
            }
        }
        let specific = groups.iter().find(|(agents, _)| agents.iter().any(|a| a != "*" && agent.contains(a.as_str())));
        let wildcard = groups.iter().find(|(agents, _)| agents.iter().any(|a| a == "*"));
        let rules = specific.or(wildcard).map(|g| g.1.clone()).unwrap_or_default();
        Self { rules }
    }

    pub fn is_allowed(&self, path: &str) -> bool {
        let mut best: Option<(usize, bool)> = None;
        for (allow, prefix) in &self.rules {
            if path.starts_with(prefix.as_str()) {
                let len = prefix.len();
                best = match best {
                    Some((l, a)) if l > len || (l == len && a) => Some((l, a)),
                    _ => Some((len, *allow)),
                };
            }
        }
        best.is_none_or(|(_, allow)| allow)
    }
}
