void s121(int n, int *a, int *b) {
    int j;
    for (int i = 0; i < n - 1; i++) {
        j = i + 1;
        a[i] = a[j] + b[i];
    }
}
