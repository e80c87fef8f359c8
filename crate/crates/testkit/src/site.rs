//! A small ToS website used across crates' tests.
//!
//! Layout:
//! - `/` links to terms, privacy, careers, an account page that redirects
//!   to `/login`, a mirror of the terms page, and an off-origin terms page
//! - `/terms`, `/privacy`: the content that should be indexed
//! - `/careers`: unrelated page, only linked with a non-legal anchor
//! - `/login`: password form
//! - `/terms-duplicate`: byte-identical body to `/terms`

use crate::Route;

pub const TERMS_SENTENCES: &[&str] = &[
    "These terms govern your access to and use of the Acme service.",
    "You must be at least sixteen years old to create an account.",
    "We may suspend accounts that violate these terms without prior notice.",
    "Any dispute arising from these terms will be resolved by binding arbitration in Delaware.",
    "You keep ownership of the content you upload to the service.",
];

pub const PRIVACY_SENTENCES: &[&str] = &[
    "We collect your email address and device identifiers when you register.",
    "We share aggregated usage statistics with advertising partners.",
    "You can request deletion of your personal data at any time.",
    "Cookies are used to remember your preferences between visits.",
];

pub const CAREERS_MARKER: &str = "Join our growing engineering team in Lisbon";
pub const LOGIN_MARKER: &str = "Please sign in to continue";
pub const HOME_MARKER: &str = "Acme builds collaborative whiteboards for distributed teams";

fn page(title: &str, sentences: &[&str], extra: &str) -> String {
    let paras: String = sentences.iter().map(|s| format!("<p>{s}</p>\n")).collect();
    format!(
        "<!doctype html><html lang=\"en\"><head><title>{title}</title></head><body>\
         <nav><a href=\"/\">Home</a> <a href=\"/pricing\">Pricing</a></nav>\
         <article><h1>{title}</h1>\n{paras}</article>{extra}\
         <footer>Copyright Acme</footer></body></html>"
    )
}

pub fn terms_html() -> String {
    page("Terms of Service", TERMS_SENTENCES, "")
}

pub fn privacy_html() -> String {
    page("Privacy Policy", PRIVACY_SENTENCES, "")
}

/// Seed page linking to the rest of the site. `off_origin` is an absolute
/// URL on another host that the crawler must never request.
pub fn home_html(off_origin: &str) -> String {
    let intro = format!(
        "{HOME_MARKER} and we want you to understand the rules that apply to the use of our products and the \
         way that we handle the information you give to us."
    );
    let links = format!(
        "<ul>\
         <li><a href=\"/terms\">Terms of Service</a></li>\
         <li><a href=\"/privacy\">Privacy Policy</a></li>\
         <li><a href=\"/careers\">Careers</a></li>\
         <li><a href=\"/account/legal\">Account legal settings</a></li>\
         <li><a href=\"/terms-duplicate\">Terms (mirror)</a></li>\
         <li><a href=\"{off_origin}\">Partner terms</a></li>\
         </ul>"
    );
    page("Acme", &[&intro], &links)
}

pub fn careers_html() -> String {
    page("Careers", &[&format!("{CAREERS_MARKER} and help us build the future of work for everyone.")], "")
}

pub fn login_html() -> String {
    format!(
        "<html><body><h1>{LOGIN_MARKER}</h1><form action=\"/login\" method=\"post\">\
         <input type=\"email\" name=\"email\"><input type=\"password\" name=\"password\">\
         <button>Sign in</button></form></body></html>"
    )
}

/// The six-page site. `off_origin` should point at a server whose request
/// log the test can inspect.
pub fn tos_site(off_origin: &str) -> Vec<(String, Route)> {
    vec![
        ("/".into(), Route::html(home_html(off_origin))),
        ("/terms".into(), Route::html(terms_html())),
        ("/privacy".into(), Route::html(privacy_html())),
        ("/careers".into(), Route::html(careers_html())),
        ("/account/legal".into(), Route::redirect("/login")),
        ("/login".into(), Route::html(login_html())),
        ("/terms-duplicate".into(), Route::html(terms_html())),
    ]
}

/// Every path redirects to the login form.
pub fn login_only_site() -> Vec<(String, Route)> {
    vec![("/".into(), Route::redirect("/login")), ("/login".into(), Route::html(login_html()))]
}
