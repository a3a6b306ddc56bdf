fn main() {
    // placeholder; CLI wiring arrives with the io module
}
