#include <cstdio>
int main() { std::puts("porobeam: cli under construction"); return 0; }
